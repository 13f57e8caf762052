# Command-line front end: run / sweep / verify / dump-de.
#
# Exit codes: 0 success, 2 configuration error, 3 numerical failure,
# 4 verification failure.
import argparse
import json
import sys

from .config import ConfigError, SystemConfig, preset
from .dequiv import FixedPointError
from .harness import (NumericFailure, build_context, emit, run_preset,
                      run_scenario, solve_point, verify)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_VERIFY = 4

PRESETS = ("fig1", "fig2", "fig3", "fig4", "fig5")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", choices=PRESETS, default=None,
                   help="named figure preset (overrides --config)")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--blocks", type=int, default=None)
    p.add_argument("--setup", choices=("clo", "slo"), default=None)
    p.add_argument("--snr", type=float, nargs="+", default=None,
                   help="SNR grid in dB (overrides the preset sweep)")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def _load_config(args) -> SystemConfig:
    overrides = {}
    for name in ("seed", "blocks", "setup"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "snr", None) is not None:
        overrides["snr_db"] = tuple(args.snr)
    if args.preset is not None:
        return preset(args.preset, **overrides)
    if args.config is not None:
        cfg = SystemConfig.from_file(args.config)
    else:
        cfg = SystemConfig()
    return cfg.replace(**overrides) if overrides else cfg.validate()


def _emit_result(result, args) -> None:
    if args.out is None:
        import io
        import csv as _csv
        from .harness import CSV_COLUMNS, _format_value
        if args.format == "json":
            json.dump(result.rows, sys.stdout, indent=2, default=float)
            sys.stdout.write("\n")
        else:
            writer = _csv.DictWriter(sys.stdout, fieldnames=CSV_COLUMNS)
            writer.writeheader()
            for row in result.rows:
                writer.writerow({k: _format_value(row[k]) for k in CSV_COLUMNS})
    else:
        emit(result, args.out, args.format)


def cmd_run(args) -> int:
    if args.preset is not None and args.setup is None:
        # A preset run reproduces the whole figure: both setups plus the
        # ideal-hardware baseline.
        overrides = {}
        for name in ("seed", "blocks"):
            if getattr(args, name) is not None:
                overrides[name] = getattr(args, name)
        if args.snr is not None:
            overrides["snr_db"] = tuple(args.snr)
        result = run_preset(args.preset, include_mc=not args.no_mc, **overrides)
    else:
        cfg = _load_config(args)
        result = run_scenario(cfg, include_mc=not args.no_mc)
    _emit_result(result, args)
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.kind == "snr":
        return cmd_run(args)
    # delta sweep: per-sample increment variance grid at fixed SNR
    from .config import DELTA_SWEEP
    from .harness import SweepResult
    cfg = _load_config(args)
    if args.deltas:
        deltas = args.deltas
    else:
        deltas = DELTA_SWEEP
    result = SweepResult()
    for delta in deltas:
        label = f"{cfg.scenario}:delta={delta:.3e}"
        sub = run_scenario(cfg.replace(pn_variance=delta, scenario=label),
                           include_mc=not args.no_mc)
        result.extend(sub)
    _emit_result(result, args)
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _load_config(args)
    report = verify(cfg)
    print(report.render())
    return EXIT_OK if report.ok else EXIT_VERIFY


def cmd_dump_de(args) -> int:
    cfg = _load_config(args)
    ctx = build_context(cfg)
    payload = {}
    for s in cfg.snr_db:
        rho = 10.0 ** (float(s) / 10.0)
        payload[f"{float(s):g}"] = solve_point(ctx, rho).to_jsonable()
    text = json.dumps(payload, indent=2)
    if args.out is None:
        print(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rsmimo",
        description="Rate-splitting massive MIMO downlink under oscillator "
                    "phase noise: Monte Carlo simulation and closed-form "
                    "large-system analysis.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario or figure preset")
    _add_common(p_run)
    p_run.add_argument("--no-mc", action="store_true",
                       help="closed-form curves only (skip Monte Carlo)")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="sweep SNR or phase-noise variance")
    p_sweep.add_argument("kind", choices=("snr", "delta"))
    _add_common(p_sweep)
    p_sweep.add_argument("--deltas", type=float, nargs="+", default=None,
                         help="increment-variance grid for the delta sweep")
    p_sweep.add_argument("--no-mc", action="store_true")
    p_sweep.set_defaults(func=cmd_sweep)

    p_verify = sub.add_parser("verify", help="run the consistency checks")
    _add_common(p_verify)
    p_verify.set_defaults(func=cmd_verify)

    p_dump = sub.add_parser("dump-de", help="dump the fixed-point solution as JSON")
    _add_common(p_dump)
    p_dump.set_defaults(func=cmd_dump_de)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FixedPointError, NumericFailure, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

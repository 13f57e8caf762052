# Closed-form vs Monte Carlo sum rates over an SNR sweep.
#
# A downsized version of the flagship scenario (fewer antennas and blocks so
# the script finishes in a few seconds). Prints one table per oscillator
# setup with the conventional-broadcast and rate-splitting sum rates from
# both evaluation paths, plus the power-split fraction t.
#
# Run:  python3 demos/snr_sweep.py
import numpy as np

from rsmimo.config import preset
from rsmimo.harness import run_scenario

SNR_GRID = (0.0, 10.0, 20.0, 30.0, 40.0)
BLOCKS = 150


def main() -> None:
    for setup in ("clo", "slo"):
        cfg = preset("fig1", setup=setup, snr_db=SNR_GRID, blocks=BLOCKS,
                     M=64, qjk_variant="corrected", de_pn_mode="sampled")
        res = run_scenario(cfg)
        print(f"\n=== setup: {setup} (M={cfg.M}, K={cfg.K}, "
              f"T={cfg.T}, {BLOCKS} blocks) ===")
        print(f"{'SNR':>5} | {'NoRS de':>8} {'NoRS mc':>8} | "
              f"{'RS de':>8} {'RS mc':>8} | {'t':>6}")
        for de_p, mc_p in zip(res.de_points, res.mc_points):
            print(f"{de_p.snr_db:5.0f} | {de_p.report.nors_sum:8.3f} "
                  f"{mc_p.report.nors_sum:8.3f} | {de_p.report.rs_sum:8.3f} "
                  f"{mc_p.report.rs_sum:8.3f} | {de_p.t:6.3f}")
        rel = np.max([abs(d.report.rs_sum - m.report.rs_sum) / m.report.rs_sum
                      for d, m in zip(res.de_points, res.mc_points)])
        print(f"worst closed-form error on the RS sum rate: {rel:.1%}")


if __name__ == "__main__":
    main()

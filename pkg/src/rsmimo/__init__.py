"""Rate-splitting massive MIMO downlink under Wiener oscillator phase noise.

Monte Carlo simulation of the TDD pilot/data cycle (LMMSE estimation, RZF
private precoding, a statistically weighted common precoder) together with
the matching closed-form large-system rate analysis.
"""
from .channel import (ChannelBlock, ChannelModelError, CovarianceProfile,
                      UserGeometry, build_covariance, draw_channel,
                      pathloss_gain, place_users, standard_complex_gaussian)
from .config import ConfigError, DELTA_SWEEP, SystemConfig, db_to_linear, preset
from .dequiv import (DeSolution, FixedPointError, compute_Q, de_q_weights,
                     de_sinr_common, de_sinr_private, private_interference,
                     solve_de, solve_delta, solve_delta_prime)
from .harness import (MonteCarloEngine, ScenarioContext, SweepResult,
                      build_context, emit, evaluate_de_point, run_preset,
                      run_scenario, verify)
from .phase_noise import (CLO, SLO, OscillatorConfig, PhaseNoiseError,
                          PhaseTrace, attenuation_factor,
                          concentrated_trace_modulus, increment_variance,
                          normalized_trace_limit, relative_rotation_diagonal,
                          rotation_diagonal, simulate_trace)
from .precoding import (PrecodingError, classical_alpha, common_coefficients,
                        common_precoder, ensemble_lambda, power_split,
                        rzf_precoder)
from .rates import (RateReport, SinrBreakdown, accumulate_rates,
                    cross_powers, effective_channel, sinr_nors, sinr_rs)
from .training import (ChannelEstimate, PilotBook, TrainingError,
                       TrainingObservation, TrainingStatistics,
                       lmmse_estimate, make_orthogonal_pilots,
                       pilot_decay_diagonal, receive_training)

__version__ = "0.1.0"

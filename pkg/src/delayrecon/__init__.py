"""Full-state reconstruction of dynamical systems from delay coordinates.

Learns the map from time-lagged partial observations back to the full
state, either by pointwise regression or by matching pushed-forward
empirical measures under a kernel discrepancy, and ships the benchmark
systems, parameter selection, balanced partitioning, and POD tooling the
experiments need.
"""

from ._accel import NUMBA_ENABLED, backend_name
from .dynamics import (OdeSystem, Trajectory, add_gaussian_noise, lorenz63,
                       lotka_volterra4, rk4_step, rossler, simulate,
                       system_from_name, vector_field)
from .embedding import (DelayConfig, DelayState, average_mutual_information,
                        cao_curves, delay_embed, select_dim, select_tau,
                        tau_steps_from_time, vector_delay_embed)
from .metrics import KernelSpec, kernel_eval, mmd_grad_second, mmd_squared, mse
from .model import (AdamState, MlpParams, TrainConfig, adam_step,
                    evaluate_mse, forward, grad_measure, grad_pointwise,
                    init_adam, init_mlp, train)
from .partition import (EmpiricalMeasure, MeasurePair, build_measure_pairs,
                        constrained_kmeans, pushforward_empirical)
from .pod import PodBasis, pod_basis, pod_project, pod_reconstruct, temporal_mean
from .dmat import DmatError, load_dmat, save_dmat
from .harness import (ExperimentConfig, NormalizationRecord, Report,
                      config_from_mapping, emit_report, load_csv_series,
                      normalize, parse_config_file, preset_config,
                      run_experiment)

__version__ = "0.1.0"

"""Lower-tail large deviations of the stochastic Airy operator, simulated at desk scale."""

from .brownian import (BrownianPath, DriftProfile, PathGrid, add_drift, girsanov_log_weight, grid_log_weight,
                       increment_max, mollify, sample_path)
from .cost import double_exp_proxy, log_double_exp, sandwich_bounds, w_t, w_t_deriv
from .estimator import (EstimatorConfig, Mode, MomentReport, Quadrature, convergence_scan, estimate_plain,
                        estimate_tilted, lower_bound_diagnostic, spectral_statistic)
from .oracle import (BC, TridiagonalOperator, discretize, eigen_count, flat_bound_rhs, lowest_eigenvalues,
                     truncated_eigensum)
from .rate import (Control, ModelParams, Partition, gaussian_reduction, localization_partition, minimize_objective,
                   objective, phi, scaled_rate, tilt_profile, v_star)
from .riccati import (PotentialKind, RiccatiConfig, RiccatiTrace, count_hill, count_sao, localized_counts,
                      monotone_lambda_scan, solve_riccati)

__version__ = "0.1.0"

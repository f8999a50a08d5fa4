"""Equilibrium large deviations of translation-invariant mean-field particle systems.

Modules:
    measures: empirical measures, Wasserstein and Prohorov distances, quotient distances.
    models: McKean-Vlasov and rank-based models, energies, drifts, assumption checks.
    confining: confining potential, its normaliser and the shift-integrated potential.
    sampler: MALA and Euler-Maruyama sampling of the centered Gibbs measure.
    densities: grid densities, free energy, stationary solutions, rate functions.
    ldp_harness: Monte Carlo LDP slopes, rate references, tilting identity checks.
    spt: market weights and capital distribution curves.
    fileio: versioned CSV and JSON files.
    cli: the ``meanfield-ldp`` command.
"""

from .confining import ConfiningSpec, hat_v, hat_v_batch, hat_v_bounds, hat_v_quadrature, vartheta, z_eta
from .densities import (GridDensity, energy_of_density, entropy, fokker_planck_residual, free_energy,
                        logistic_density, minimize_free_energy_mv, rate, rate_gap, relative_entropy,
                        stationary_rb)
from .errors import (ConfigError, ConvergenceError, DivergedChainError, IncompatibleSpaceError,
                     InsufficientDataError, InvalidArgumentError, InvalidOrderError, MeanFieldError,
                     UnsupportedDimensionError)
from .ldp_harness import (EventSpec, LdpEstimate, equilibrium, estimate_ldp_curve, exp_moment_diag,
                          knn_entropy, rate_infimum, sanov_compare, verify_tilting)
from .measures import (EmpiricalMeasure, best_shift, center, prohorov_1d, quotient_distance, translate,
                       wasserstein_1d)
from .models import (MvModel, RbModel, builtin_model, check_assumptions, drift, energy, mv_abs, mv_cubic,
                     mv_polynomial, mv_quadratic, rb_logistic_flux, rb_polynomial)
from .sampler import SampleSet, SamplerConfig, estimate_partition_ratio, sample_equilibrium
from .spt import atypicality_report, capital_curve, market_weights, typical_curve

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]

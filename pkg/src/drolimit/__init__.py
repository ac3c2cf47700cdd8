"""Scaling limits of multi-period Wasserstein-DRO operators on grids."""

from .dual import (
    AmbiguitySpec,
    DualInstance,
    DualSolution,
    brute_force_sup,
    dual_objective,
    wasserstein_inf,
    wasserstein_sup,
)
from .errors import ConfigError, DataError, InputError, ModelError
from .fields import (
    CompactWindow,
    Grid,
    ScalarField,
    gradient_fd,
    gradient_norm,
    lipschitz_estimate,
    load_csv,
    save_csv,
    sup_distance,
)
from .models import (
    Action,
    BROWNIAN,
    DiscreteMeasure,
    ORNSTEIN_UHLENBECK,
    ReferenceModel,
    brownian_model,
    check_chapman_kolmogorov,
    check_psi_stability,
    covariance,
    law,
    psi,
)
from .operators import (
    DyadicSchedule,
    OperatorConfig,
    Partition,
    ScalingLimitResult,
    best_case_diagnostic,
    best_case_step,
    compose,
    dro_step,
    dro_step_single_action,
    dyadic_partition,
    reference_inf_step,
    reference_step,
    scaling_limit,
)
from .pde import PdeScheme, SpaceTimeField, cfl_time_step, generator_apply, solve, solve_terminal, step_forward

__version__ = "0.1.0"

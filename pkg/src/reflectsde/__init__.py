"""Pathwise simulation of reflected SDEs on [0, infinity) driven by a single
Brownian motion, with boundary local time, partition-averaged Riemann sums of
the state-dependent integrand, and a Monte Carlo harness that measures the
regularity and convergence behaviour of the discrete objects, including the
substitution of whole-path-measurable initial values.
"""

from ._backend import NUMBA_ENABLED, backend_name
from .coefficients import (
    BUILTIN_SIGMAS,
    CoefficientSet,
    CoefficientValidation,
    ito_drift,
    make_coefficients,
    validate_coefficients,
)
from .config import ConfigError, RunConfig, default_config, parse_config
from .kernels import ObservedSolve, solve_observed_batch, solve_reflected_batch
from .paths import (
    INCREMENT_QUANTUM,
    BrownianPath,
    Partition,
    TimeGrid,
    brownian_increments,
    coarse_increments,
    make_dyadic_partition,
    make_fine_grid,
    sample_brownian,
)
from .reflect import (
    FlowField,
    ReflectedPath,
    evaluate_flow_at,
    local_time_via_reflection,
    solve_flow,
    solve_observed,
    solve_reflected,
)
from .skorohod import (
    SkorohodPair,
    default_band,
    exact_input_band,
    pusher_leakage,
    skorohod_map,
)
from .stratonovich import (
    ErrorDecomposition,
    RiemannSumResult,
    boundary_sigma_prime_identity,
    decompose_error,
    local_time_functional,
    reference_cumulatives,
    reference_integral,
    riemann_sum,
    riemann_sum_path,
)
from .studies import (
    Check,
    MomentEstimate,
    RateFit,
    STUDY_RUNNERS,
    StudyReport,
    fit_rate,
    mc_estimate,
    study_riemann_convergence,
    study_spatial_regularity,
    study_substitution,
    study_time_regularity,
    study_two_point_riemann,
    study_uniform_convergence,
)

__version__ = "0.1.0"

"""Optimal and ensemble filtering for linear diffusions with Poisson-sampled observations."""

__version__ = "0.1.0"

from .ensemble import (
    EnsembleState,
    empirical_gain,
    ensemble_predict,
    ensemble_update,
    init_ensemble,
    run_ensemble,
)
from .generator import (
    DynkinReport,
    GaussianNoise,
    JumpDiffusionSpec,
    PathDivergenceError,
    TestFunction,
    dynkin_check,
    generator_apply,
)
from .models import LinearGaussianModel, ObservationEvent, PoissonClock, StateTrajectory
from .optimal import (
    FilterState,
    MeanFieldState,
    OptimalFilter,
    kalman_gain,
    run_mean_field,
    run_optimal,
)
from .rng import Role, RngStream
from .sde import (
    OUTransition,
    build_grid,
    euler_maruyama_step,
    exact_ou_step,
    ou_transition,
    psd_sqrt,
    sample_clock,
    simulate_state,
)
from .theory import (
    ExpectationTrajectory,
    InfeasibleRegimeError,
    ScalarModel,
    TheoremReport,
    check_sampling_rate,
    covariance_lower_bounds,
    expected_cov_odes,
    expected_mean_odes,
    gamma_bar,
    phi,
    phi_product_identity_residual,
    ultimate_bound,
)

__all__ = [
    "__version__",
    "Role",
    "RngStream",
    "LinearGaussianModel",
    "PoissonClock",
    "ObservationEvent",
    "StateTrajectory",
    "sample_clock",
    "build_grid",
    "ou_transition",
    "OUTransition",
    "exact_ou_step",
    "euler_maruyama_step",
    "simulate_state",
    "psd_sqrt",
    "FilterState",
    "MeanFieldState",
    "OptimalFilter",
    "kalman_gain",
    "run_optimal",
    "run_mean_field",
    "EnsembleState",
    "init_ensemble",
    "empirical_gain",
    "ensemble_predict",
    "ensemble_update",
    "run_ensemble",
    "InfeasibleRegimeError",
    "ScalarModel",
    "ExpectationTrajectory",
    "TheoremReport",
    "phi",
    "phi_product_identity_residual",
    "expected_cov_odes",
    "expected_mean_odes",
    "gamma_bar",
    "check_sampling_rate",
    "ultimate_bound",
    "covariance_lower_bounds",
    "GaussianNoise",
    "TestFunction",
    "JumpDiffusionSpec",
    "DynkinReport",
    "PathDivergenceError",
    "generator_apply",
    "dynkin_check",
]

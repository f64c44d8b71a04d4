"""Bayesian contact-point estimation for indentation force curves."""

from .model import (
    ChainState,
    ConditioningError,
    ConfigurationError,
    DegeneratePartitionError,
    DomainError,
    ForceCurve,
    GeometryError,
    HertzGeometry,
    Hyperparameters,
    ModelError,
    ModelSpec,
    SamplerConfig,
    hertz_constant,
    x_of_gamma,
)
from .design import (
    ConstraintMap,
    DesignPair,
    Standardization,
    build_constraint_map,
    build_design,
    shift_poly_coeffs,
)
from .posterior import (
    MarginalAux,
    MarginalPosterior,
    compute_marginal_aux,
    grid_profile,
    log_full_posterior,
    log_marginal_constrained,
    log_marginal_unconstrained,
)
from .samplers import (
    ChainTrace,
    adapt_step_sizes,
    draw_beta_conditional,
    mh_gamma_step,
    run_chains,
    run_gibbs_constrained,
    run_gibbs_unconstrained,
    run_sampler,
)
from .inference import (
    BaselineResult,
    PosteriorReport,
    effective_sample_size,
    geweke_z,
    least_squares_baseline,
    summarize,
    youngs_modulus_samples,
)

__all__ = [
    "BaselineResult",
    "ChainState",
    "ChainTrace",
    "ConditioningError",
    "ConfigurationError",
    "ConstraintMap",
    "DegeneratePartitionError",
    "DesignPair",
    "DomainError",
    "ForceCurve",
    "GeometryError",
    "HertzGeometry",
    "Hyperparameters",
    "MarginalAux",
    "MarginalPosterior",
    "ModelError",
    "ModelSpec",
    "PosteriorReport",
    "SamplerConfig",
    "Standardization",
    "adapt_step_sizes",
    "build_constraint_map",
    "build_design",
    "compute_marginal_aux",
    "draw_beta_conditional",
    "effective_sample_size",
    "geweke_z",
    "grid_profile",
    "hertz_constant",
    "least_squares_baseline",
    "log_full_posterior",
    "log_marginal_constrained",
    "log_marginal_unconstrained",
    "mh_gamma_step",
    "run_chains",
    "run_gibbs_constrained",
    "run_gibbs_unconstrained",
    "run_sampler",
    "shift_poly_coeffs",
    "summarize",
    "x_of_gamma",
    "youngs_modulus_samples",
]

__version__ = "0.1.0"

"""Bayesian changepoint detection with spike-and-slab variable selection.

The package fits changing linear models: the mean structure switches between
contiguous blocks at unknown changepoints, and a global spike-and-slab layer
selects which covariates are active.  Coefficients and block levels integrate
out analytically, so model search runs over indicator vectors only, with
exact collapsed marginal likelihoods, an exhaustive small-instance oracle and
a penalized-segmentation baseline alongside the Gibbs sampler.
"""

from .bench import SCENARIOS, run_bench, run_scenario
from .enumeration import ExactPosterior, compare_with_sampler, enumerate_exact
from .errors import (
    ConfigError,
    CpslabError,
    DegenerateInput,
    DimensionMismatch,
    MaskTooLarge,
    NonFiniteError,
    ParseError,
    RidgeFallbackWarning,
    SchemaError,
    SingularSystem,
    TooLarge,
)
from .gibbs import (
    ChainState,
    PosteriorSummary,
    SamplerConfig,
    TAU2_GRID,
    fitted_means,
    gibbs_sweep_changepoints,
    gibbs_sweep_inclusion,
    initial_state,
    run_chain,
    update_sigma2,
)
from .linalg import SegmentData, SegmentFit, empirical_sigma2, fit_regularized_ls, logdet_gram
from .model import (
    Dataset,
    InclusionMask,
    ModelId,
    PriorConfig,
    Segmentation,
    log_bayes_factor,
    log_marginal,
    log_marginal_blocks,
    log_posterior_ratio,
    log_prior,
    model_fitted_values,
)
from .pelt import PeltResult, estimate_noise_variance, optimal_partition_dp, pelt_detect
from .rng import make_rng
from .simulate import (
    CsvSchema,
    GroundTruth,
    gen_example1,
    gen_example2,
    gen_example3,
    generate_example,
    load_csv,
    write_dataset_csv,
)

__version__ = "0.1.0"

__all__ = [
    "CpslabError", "ConfigError", "DegenerateInput", "DimensionMismatch",
    "MaskTooLarge", "NonFiniteError", "ParseError", "RidgeFallbackWarning",
    "SchemaError", "SingularSystem", "TooLarge",
    "SegmentData", "SegmentFit", "fit_regularized_ls", "logdet_gram", "empirical_sigma2",
    "Dataset", "Segmentation", "InclusionMask", "PriorConfig", "ModelId",
    "log_marginal", "log_marginal_blocks", "log_prior", "log_bayes_factor",
    "log_posterior_ratio", "model_fitted_values",
    "ChainState", "SamplerConfig", "PosteriorSummary", "TAU2_GRID",
    "gibbs_sweep_changepoints", "gibbs_sweep_inclusion", "update_sigma2",
    "run_chain", "fitted_means", "initial_state", "make_rng",
    "ExactPosterior", "enumerate_exact", "compare_with_sampler",
    "PeltResult", "pelt_detect", "optimal_partition_dp", "estimate_noise_variance",
    "GroundTruth", "CsvSchema", "gen_example1", "gen_example2", "gen_example3",
    "generate_example", "load_csv", "write_dataset_csv",
    "SCENARIOS", "run_scenario", "run_bench",
]

"""Differentially private estimation of bandable covariance matrices under zCDP."""

from ._backend import BACKEND
from .errors import (
    ArgumentError,
    BudgetError,
    ConfigError,
    DPBandCovError,
    FitError,
    LayoutError,
    ModelError,
    NumericError,
)
from .matrix_core import (
    BandPartition,
    GammaRegion,
    HierarchicalPartition,
    IndexBlock,
    RegionMask,
    SymMatrix,
    band_partition,
    frobenius_norm,
    hierarchical_partition,
    operator_norm,
    restrict,
    sym_eigen,
    tridiagonal_mask,
)
from .privacy import (
    NoiseSpec,
    PrivacyBudget,
    block_cov_sensitivity,
    gaussian_sigma,
    sample_gue_block,
    split_budget_adaptive,
    split_budget_tridiagonal,
    zcdp_to_approx_dp,
)
from .rng import RandomStream
from .estimators import (
    AdaptiveConfig,
    Dataset,
    EstimateReport,
    TridiagonalConfig,
    adaptive_estimator,
    blockwise_tridiagonal,
    dp_cov_block,
    naive_full_estimator,
    precision_estimator,
    select_block_size,
)
from .datagen import (
    CovarianceModel,
    class_membership_diagnostics,
    make_exponential,
    make_power_deterministic,
    make_power_random,
    sample_mvn,
)
from .theory import (
    RateSpec,
    fit_loglog_slope,
    gaussian_fisher_opnorm,
    gaussian_fisher_trace,
    minimax_rate,
    naive_rate,
    tridiagonal_norm_bound_check,
)

__version__ = "0.1.0"

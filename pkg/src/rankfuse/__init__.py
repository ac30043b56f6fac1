"""Rank-normalized importance fusion, weight search, top-k channel pruning,
and plateau/regime analysis against pluggable accuracy oracles."""

from .core import (
    LayerProfile,
    ModelProfile,
    Seed,
    Selection,
    Sparsity,
    load_profile,
    profile_to_document,
    validate_profile,
)
from .ranknorm import BudgetVector, RankMap, allocate_budgets, rank_mm
from .features import (
    FeatureMatrix,
    FeatureSpec,
    build_feature,
    build_feature_matrix,
    isotonic_residual,
    logistic_orbit,
    orbit_statistic,
    rank_to_mu,
    savgol_smooth,
    spearman,
)
from .fusion import FusionWeights, ScoreVector, fuse_scores, select_topk
from .dbo import OptimizerConfig, SearchResult, optimize
from .oracle import (
    EvalRequest,
    EvalResult,
    SurrogateModel,
    external_evaluate,
    fetch_profile,
    make_surrogate,
    open_oracle,
    surrogate_evaluate,
)
from .analysis import (
    CellStats,
    RegimeReport,
    chebyshev_kappa,
    escape_delta,
    magnitude_independence_report,
    plateau_stats,
    regime_verdict,
    wiggle_premium,
)
from .adaptive import AdaptiveConfig, ProbeReport, adaptive_prune
from .experiment import ExperimentConfig, analyze_results, run_experiment
from .variants import Variant, builtin_variants, default_class_map

__version__ = "0.1.0"

"""Weight search for one scorer against an evaluation oracle.

Glue between the feature/fusion layer, the optimizer, and an oracle
session: build the feature matrix once, then let the optimizer drive the
exponent vector with fitness = negative proxy accuracy.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .core import ModelProfile, Seed, Selection, Sparsity
from .dbo import OptimizerConfig, SearchResult, optimize
from .features import FeatureSpec, build_feature_matrix
from .fusion import EPSILON_TAYLOR, FusedScorer, FusionWeights, select_topk
from .oracle import OracleSession
from .ranknorm import BudgetVector, allocate_budgets, rank_mm

__all__ = ["SearchOutcome", "derive_seed", "build_scorer", "search_weights", "prune_once"]


def derive_seed(*parts) -> Seed:
    """Stable 64-bit sub-seed from arbitrary labeled parts."""
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode("utf-8")).digest()
    return Seed(int.from_bytes(digest[:8], "big"))


@dataclass(frozen=True)
class SearchOutcome:
    weights: FusionWeights
    proxy_accuracy: float
    selection: Selection
    evaluations: int
    history: tuple[float, ...]


def build_scorer(
    profile: ModelProfile,
    specs: tuple[FeatureSpec, ...],
    seed: Seed,
    epsilon_taylor: float = EPSILON_TAYLOR,
) -> FusedScorer:
    """Feature matrix + log precomputation for the given spec bundle."""
    rank_map = rank_mm(profile)
    features = (
        build_feature_matrix(profile, rank_map, list(specs), seed) if specs else None
    )
    return FusedScorer(profile, features, epsilon_taylor)


def search_weights(
    scorer: FusedScorer,
    budgets: BudgetVector,
    session: OracleSession,
    config: OptimizerConfig,
) -> SearchOutcome:
    """Optimize the exponent vector on the proxy split; returns the best."""
    dim = 1 + scorer.feature_count
    bounds = config.bounds

    def fitness(point: np.ndarray) -> float:
        weights = FusionWeights.from_point(point, bounds)
        selection = select_topk(scorer.score(weights), budgets)
        return -session.evaluate(selection, split="proxy").accuracy

    result: SearchResult = optimize(fitness, dim, config)
    best = FusionWeights.from_point(result.best_point, bounds)
    selection = select_topk(scorer.score(best), budgets)
    return SearchOutcome(
        weights=best,
        proxy_accuracy=-result.best_fitness,
        selection=selection,
        evaluations=result.evaluations,
        history=result.history,
    )


def prune_once(
    profile: ModelProfile,
    specs: tuple[FeatureSpec, ...],
    weights: FusionWeights,
    s: Sparsity,
    seed: Seed,
    epsilon_taylor: float = EPSILON_TAYLOR,
) -> Selection:
    """Selection for fixed weights (no search)."""
    scorer = build_scorer(profile, specs, seed, epsilon_taylor)
    budgets = allocate_budgets(profile, s)
    return select_topk(scorer.score(weights), budgets)

"""Multiplicative exponent fusion and per-layer top-k selection.

Scores are s(c) = max(taylor_c, eps)^w_t * prod_i C_i(c)^w_i. With exponents
up to |40| and features down to 0.1 the linear-space product under/overflows,
so everything is carried as log s; top-k only needs the ordering, which log
preserves exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .core import ModelProfile, Selection
from .errors import (
    BudgetExceedsLayerError,
    MisalignedError,
    NonPositiveFeatureError,
)
from .features import FeatureMatrix
from .ranknorm import BudgetVector

__all__ = [
    "DEFAULT_BOUNDS",
    "EPSILON_TAYLOR",
    "FusionWeights",
    "ScoreVector",
    "FusedScorer",
    "fuse_scores",
    "select_topk",
]

DEFAULT_BOUNDS = (-40.0, 40.0)
EPSILON_TAYLOR = 1e-12  # dead channels have taylor 0; negative w_t needs a floor


@dataclass(frozen=True)
class FusionWeights:
    """Exponent vector (w_t, w_1..w_D) inside box bounds."""

    w_t: float
    w: tuple[float, ...] = ()
    bounds: tuple[float, float] = DEFAULT_BOUNDS

    def __post_init__(self) -> None:
        lo, hi = self.bounds
        if lo >= hi:
            raise ValueError(f"bounds must satisfy lo < hi, got {self.bounds}")
        for val in (self.w_t, *self.w):
            if not (lo <= val <= hi):
                raise ValueError(f"exponent {val} outside bounds [{lo}, {hi}]")

    @classmethod
    def from_point(cls, point: np.ndarray, bounds: tuple[float, float] = DEFAULT_BOUNDS) -> "FusionWeights":
        point = np.asarray(point, dtype=np.float64)
        return cls(w_t=float(point[0]), w=tuple(float(v) for v in point[1:]), bounds=bounds)

    @property
    def dim(self) -> int:
        return 1 + len(self.w)


@dataclass(frozen=True)
class ScoreVector:
    """Per-layer channel scores, stored as log s (finite by construction)."""

    log_scores: Mapping[str, np.ndarray]

    def __post_init__(self) -> None:
        for lid, vec in self.log_scores.items():
            if not np.all(np.isfinite(vec)):
                raise NonPositiveFeatureError(f"non-finite log score in layer {lid!r}")

    def scores(self) -> dict[str, np.ndarray]:
        """Linear-space scores; may under/overflow for extreme exponents."""
        return {lid: np.exp(vec) for lid, vec in self.log_scores.items()}


class FusedScorer:
    """Precomputed log inputs for repeated scoring during weight search.

    `features` may be None for the bare backbone (D = 0): scores are then
    max(taylor, eps)^w_t alone.
    """

    def __init__(self, profile: ModelProfile, features: FeatureMatrix | None,
                 epsilon_taylor: float = EPSILON_TAYLOR):
        if features is not None:
            if features.layer_ids != profile.layer_ids:
                raise MisalignedError("feature matrix layers do not match profile")
            if features.values.shape[0] != profile.total_channels:
                raise MisalignedError(
                    f"feature matrix has {features.values.shape[0]} rows for "
                    f"{profile.total_channels} channels"
                )
        if epsilon_taylor <= 0:
            raise ValueError("epsilon_taylor must be positive")
        self._feature_count = features.column_count if features is not None else 0
        self._log_taylor: dict[str, np.ndarray] = {}
        self._log_feats: dict[str, np.ndarray] = {}
        for layer in profile.layers:
            self._log_taylor[layer.layer_id] = np.log(
                np.maximum(layer.taylor, epsilon_taylor)
            )
            if features is None:
                continue
            block = features.layer_block(layer.layer_id)
            if block.shape[0] != layer.channels:
                raise MisalignedError(
                    f"layer {layer.layer_id!r}: {block.shape[0]} feature rows "
                    f"for {layer.channels} channels"
                )
            if not np.all(block > 0):
                raise NonPositiveFeatureError(
                    f"layer {layer.layer_id!r}: feature entries must be > 0"
                )
            self._log_feats[layer.layer_id] = np.log(block)

    @property
    def feature_count(self) -> int:
        return self._feature_count

    def log_scores(self, weights: FusionWeights) -> dict[str, np.ndarray]:
        if len(weights.w) != self._feature_count:
            raise MisalignedError(
                f"{len(weights.w)} feature exponents for {self._feature_count} columns"
            )
        wvec = np.asarray(weights.w, dtype=np.float64)
        out = {}
        for lid, ltay in self._log_taylor.items():
            log_s = weights.w_t * ltay
            if self._feature_count:
                log_s = log_s + self._log_feats[lid] @ wvec
            out[lid] = log_s
        return out

    def score(self, weights: FusionWeights) -> ScoreVector:
        return ScoreVector(log_scores=self.log_scores(weights))


def fuse_scores(
    profile: ModelProfile,
    features: FeatureMatrix | None,
    weights: FusionWeights,
    epsilon_taylor: float = EPSILON_TAYLOR,
) -> ScoreVector:
    """Score every channel with the fused exponent form, in log space."""
    return FusedScorer(profile, features, epsilon_taylor).score(weights)


def _topk_indices(log_scores: np.ndarray, k: int) -> np.ndarray:
    # stable sort on the negated scores: ties resolve to the lower index
    order = np.argsort(-log_scores, kind="stable")
    return np.sort(order[:k])


def select_topk(scores: ScoreVector, budgets: BudgetVector) -> Selection:
    """Keep the K_l highest-scoring channels per layer; ties to lower index."""
    kept: dict[str, tuple[int, ...]] = {}
    for lid, vec in scores.log_scores.items():
        k = budgets.budgets[lid]
        if k > vec.shape[0]:
            raise BudgetExceedsLayerError(
                f"layer {lid!r}: budget {k} exceeds {vec.shape[0]} channels"
            )
        kept[lid] = tuple(int(i) for i in _topk_indices(vec, k))
    return Selection(kept=kept)

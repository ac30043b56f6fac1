"""Per-layer rank min-max normalization and proportional budget allocation.

The rank grid maps each layer's magnitude order onto {0.1 + 0.9*(r-1)/(n-1)},
so the smallest-magnitude channel sits at 0.1 and the largest at 1.0. Any
strictly monotone transform of these values selects identical top-k sets,
which is why per-layer budgets are allocated independently of the scorer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .core import ModelProfile, Sparsity
from .errors import BudgetExceedsLayerError, BudgetInfeasibleError

__all__ = ["RankMap", "BudgetVector", "rank_mm", "allocate_budgets", "rank_grid"]


def rank_grid(n: int) -> np.ndarray:
    """The n-point uniform grid on [0.1, 1.0]; endpoints exact.

    The ratio is computed before the 0.9 scale so the last point is exactly
    0.1 + 0.9*1.0 == 1.0 for every n.
    """
    if n < 2:
        raise ValueError("grid needs at least 2 points")
    return 0.1 + 0.9 * (np.arange(n, dtype=np.float64) / (n - 1))


@dataclass(frozen=True)
class RankMap:
    """Per-layer rank-normalized magnitude positions on the [0.1, 1.0] grid."""

    values: Mapping[str, np.ndarray]

    def layer(self, layer_id: str) -> np.ndarray:
        return self.values[layer_id]


@dataclass(frozen=True)
class BudgetVector:
    """Channels to KEEP per layer; totals round((1-S)*|C|)."""

    budgets: Mapping[str, int]

    def total(self) -> int:
        return sum(self.budgets.values())


def _rank_positions(values: np.ndarray) -> np.ndarray:
    """0-based ascending rank of each entry; ties broken by lower index."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.shape[0], dtype=np.int64)
    ranks[order] = np.arange(values.shape[0])
    return ranks


def rank_mm(profile: ModelProfile) -> RankMap:
    """Map each layer's magnitudes onto the uniform [0.1, 1.0] rank grid."""
    out: dict[str, np.ndarray] = {}
    for layer in profile.layers:
        grid = rank_grid(layer.channels)
        vals = grid[_rank_positions(layer.magnitude)]
        vals.flags.writeable = False
        out[layer.layer_id] = vals
    return RankMap(values=out)


def rank_normalize(values: np.ndarray) -> np.ndarray:
    """Replace values by their rank-grid positions (ties by lower index)."""
    grid = rank_grid(values.shape[0])
    return grid[_rank_positions(np.asarray(values, dtype=np.float64))]


def _round_half_away(x: float) -> int:
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


def allocate_budgets(profile: ModelProfile, s: Sparsity) -> BudgetVector:
    """Largest-remainder split of the keep target across layers.

    Target T = round((1-S)*|C|), half away from zero. Each layer gets
    floor(T*n_l/|C|); leftover units go to the largest fractional parts,
    ties resolved by layer order.
    """
    total = profile.total_channels
    target = _round_half_away(s.keep_fraction * total)
    if target <= 0 or target >= total:
        raise BudgetInfeasibleError(
            f"keep target {target} of {total} channels is degenerate"
        )

    shares = [target * layer.channels / total for layer in profile.layers]
    base = [min(int(math.floor(sh)), l.channels) for sh, l in zip(shares, profile.layers)]
    leftover = target - sum(base)
    # stable sort on -fraction keeps layer order among ties
    by_fraction = sorted(
        range(len(shares)), key=lambda i: -(shares[i] - math.floor(shares[i]))
    )
    budgets = dict(zip(profile.layer_ids, base))
    for i in by_fraction:
        if leftover == 0:
            break
        lid = profile.layers[i].layer_id
        if budgets[lid] < profile.layers[i].channels:
            budgets[lid] += 1
            leftover -= 1
    if leftover:
        raise BudgetExceedsLayerError("keep target exceeds total layer capacity")
    return BudgetVector(budgets=budgets)

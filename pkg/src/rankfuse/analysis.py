"""Plateau statistics, escape deltas, regime verdicts, and shape complexity.

Cell statistics aggregate per-seed results; the regime machinery reproduces
the published decision arithmetic: plateau height from the anchor scorer,
per-class best escape deltas, the wiggle premium (best raw minus best
smoothed escape), and the threshold decision tree. Verdicts sitting on a
threshold boundary, or kappa0 verdicts coexisting with a positive raw
escape, are surfaced as diagnostics rather than silently reclassified.

Shape complexity is measured as the smallest power-of-two Chebyshev
expansion size reproducing a rank-space feature within sup-norm epsilon
(log2 of it), estimated by least squares on a dense uniform grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from numpy.polynomial import chebyshev as npcheb

from .errors import GridTooCoarseError, TooFewError
from .features import isotonic_residual, spearman

__all__ = [
    "DEFAULT_THRESHOLDS",
    "CellStats",
    "RegimeReport",
    "MagnitudeIndependence",
    "plateau_stats",
    "escape_delta",
    "wiggle_premium",
    "regime_verdict",
    "build_regime_report",
    "chebyshev_error_curve",
    "chebyshev_kappa",
    "kappa_from_errors",
    "magnitude_independence_report",
]

DEFAULT_THRESHOLDS = (0.01, 0.005)  # (t_env, t_raw)
_BOUNDARY_TOL = 1e-6


@dataclass(frozen=True)
class CellStats:
    """One (variant, sparsity) cell: seed-aggregated accuracies."""

    variant: str
    sparsity: float
    mean: float
    std: float
    per_seed: tuple[tuple[int, float, float], ...]  # (seed, heldout, proxy)

    @classmethod
    def from_seed_rows(
        cls, variant: str, sparsity: float, rows: Sequence[tuple[int, float, float]]
    ) -> "CellStats":
        held = np.array([r[1] for r in rows], dtype=np.float64)
        std = float(held.std(ddof=1)) if held.shape[0] > 1 else 0.0
        return cls(
            variant=variant,
            sparsity=sparsity,
            mean=float(held.mean()),
            std=std,
            per_seed=tuple((int(s), float(h), float(p)) for s, h, p in rows),
        )


@dataclass(frozen=True)
class RegimeReport:
    """Per-sparsity escape arithmetic and the threshold verdict."""

    sparsity: float
    plateau: float
    deltas: Mapping[str, float]  # kappa0/kappa1/kappa2 best escape vs plateau
    wiggle_premium: float
    verdict: str
    diagnostics: tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "sparsity": self.sparsity,
            "plateau": self.plateau,
            "deltas": dict(self.deltas),
            "wiggle_premium": self.wiggle_premium,
            "verdict": self.verdict,
            "diagnostics": list(self.diagnostics),
        }


def plateau_stats(cells: Sequence[CellStats]) -> tuple[float, float]:
    """(mean of variant means, max minus min) over rank-monotone cells."""
    if len(cells) < 2:
        raise TooFewError("plateau statistics need at least 2 variants")
    means = np.array([c.mean for c in cells], dtype=np.float64)
    return float(means.mean()), float(means.max() - means.min())


def escape_delta(class_cells: Sequence[CellStats], plateau: float) -> float:
    """Best class mean minus the plateau height."""
    if not class_cells:
        raise TooFewError("escape delta needs at least one cell")
    return float(max(c.mean for c in class_cells) - plateau)


def wiggle_premium(delta_k2: float, delta_k1: float) -> float:
    """Best raw-class escape minus best smoothed-class escape."""
    return delta_k2 - delta_k1


def regime_verdict(
    delta_env: float,
    delta_raw: float,
    thresholds: tuple[float, float] = DEFAULT_THRESHOLDS,
) -> str:
    """Threshold decision tree over the two probe gaps.

    delta_env is the envelope-class accuracy minus the plateau accuracy;
    delta_raw is the raw-class accuracy minus the envelope-class accuracy.
    """
    t_env, t_raw = thresholds
    if delta_env < t_env:
        return "kappa0"
    if delta_raw < t_raw:
        return "kappa1"
    return "kappa2"


def build_regime_report(
    sparsity: float,
    anchor_cell: CellStats,
    kappa0_cells: Sequence[CellStats],
    kappa1_cells: Sequence[CellStats],
    kappa2_cells: Sequence[CellStats],
    thresholds: tuple[float, float] = DEFAULT_THRESHOLDS,
) -> RegimeReport:
    """Assemble deltas, premium, verdict, and boundary diagnostics for one S."""
    plateau = anchor_cell.mean
    deltas: dict[str, float] = {}
    if kappa0_cells:
        deltas["kappa0"] = escape_delta(kappa0_cells, plateau)
    if not kappa1_cells or not kappa2_cells:
        raise TooFewError("regime verdict needs kappa1 and kappa2 cells")
    deltas["kappa1"] = escape_delta(kappa1_cells, plateau)
    deltas["kappa2"] = escape_delta(kappa2_cells, plateau)

    best_env = max(c.mean for c in kappa1_cells)
    best_raw = max(c.mean for c in kappa2_cells)
    delta_env = best_env - plateau
    delta_raw = best_raw - best_env
    verdict = regime_verdict(delta_env, delta_raw, thresholds)

    t_env, t_raw = thresholds
    diagnostics: list[str] = []
    if abs(delta_env - t_env) <= _BOUNDARY_TOL:
        diagnostics.append("env_delta_at_threshold")
    if abs(delta_raw - t_raw) <= _BOUNDARY_TOL:
        diagnostics.append("raw_delta_at_threshold")
    if verdict == "kappa0" and deltas["kappa2"] >= t_env:
        diagnostics.append("raw_escape_with_kappa0_verdict")

    return RegimeReport(
        sparsity=sparsity,
        plateau=plateau,
        deltas=deltas,
        wiggle_premium=wiggle_premium(deltas["kappa2"], deltas["kappa1"]),
        verdict=verdict,
        diagnostics=tuple(diagnostics),
    )


# ------------------------------------------------------- shape complexity

def _degree_sweep(d_max: int) -> list[int]:
    degrees = [1]
    while degrees[-1] * 2 <= d_max:
        degrees.append(degrees[-1] * 2)
    return degrees


def chebyshev_error_curve(
    phi: np.ndarray, d_max: int = 256
) -> dict[int, float]:
    """Max-abs least-squares residual for each expansion size D in the sweep.

    phi must be sampled on a uniform grid over [0.1, 1.0] with at least
    4*d_max points.
    """
    phi = np.asarray(phi, dtype=np.float64)
    if phi.ndim != 1 or phi.shape[0] < 4 * d_max:
        raise GridTooCoarseError(
            f"need a grid of >= {4 * d_max} points for d_max {d_max}, got {phi.shape[0]}"
        )
    x = np.linspace(0.1, 1.0, phi.shape[0])
    errors: dict[int, float] = {}
    for d in _degree_sweep(d_max):
        fit = npcheb.Chebyshev.fit(x, phi, deg=d - 1, domain=[0.1, 1.0])
        errors[d] = float(np.max(np.abs(phi - fit(x))))
    return errors


def kappa_from_errors(errors: Mapping[int, float], epsilon: float) -> tuple[float, int]:
    """Smallest sweep D with error <= epsilon; (inf, d_max) when none fits."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    for d in sorted(errors):
        if errors[d] <= epsilon:
            return math.log2(d), d
    return math.inf, max(errors)


def chebyshev_kappa(
    phi: np.ndarray, epsilon: float, d_max: int = 256
) -> tuple[float, int]:
    """Rank-space shape complexity: log2 of the smallest adequate expansion."""
    return kappa_from_errors(chebyshev_error_curve(phi, d_max), epsilon)


@dataclass(frozen=True)
class MagnitudeIndependence:
    rho: float
    residual_energy_fraction: float
    degenerate: bool


def magnitude_independence_report(
    feature: np.ndarray, rank: np.ndarray
) -> MagnitudeIndependence:
    """Spearman trend plus the energy left after monotone detrending."""
    feature = np.asarray(feature, dtype=np.float64)
    rank = np.asarray(rank, dtype=np.float64)
    rho, degenerate = spearman(feature, rank)
    centered = feature - feature.mean()
    denom = float(centered @ centered)
    if denom == 0.0:
        return MagnitudeIndependence(rho=rho, residual_energy_fraction=0.0, degenerate=True)
    resid = isotonic_residual(feature, rank)
    return MagnitudeIndependence(
        rho=rho,
        residual_energy_fraction=float(resid @ resid) / denom,
        degenerate=degenerate,
    )

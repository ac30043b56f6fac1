"""Per-channel feature generation from the rank grid.

Six generator kinds cover the feature families used by the scorers: orbit
statistics of the logistic map at rank-mapped mu (raw or smoothed), sine
banks, seeded Weierstrass sums, deterministic non-monotone transforms of the
rank itself, seeded monotone splines, and parametric bumps. Every emitted
column is re-ranked onto the per-layer [0.1, 1.0] grid, so columns are
strictly positive and scale-comparable regardless of the generator.

Also houses the rank-statistics helpers the analysis layer builds on:
Spearman correlation with tie-averaged ranks and the isotonic (PAVA)
residual used for monotone detrending.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.signal import savgol_filter
from scipy.stats import rankdata

from .core import ModelProfile, Seed
from .errors import (
    BadWindowError,
    InvalidInitError,
    NonPositiveFeatureError,
    OutOfRangeError,
    TooShortError,
    UnknownKindError,
    WindowTooLargeError,
)
from .ranknorm import RankMap, rank_normalize

__all__ = [
    "MU_LO",
    "MU_HI",
    "ORBIT_STEPS",
    "ORBIT_X0",
    "SG_WINDOW",
    "SG_POLYORDER",
    "FeatureSpec",
    "FeatureMatrix",
    "rank_to_mu",
    "logistic_orbit",
    "orbit_statistic",
    "savgol_smooth",
    "spearman",
    "isotonic_fit",
    "isotonic_residual",
    "build_feature",
    "build_feature_matrix",
    "feature_shape",
]

MU_LO = 3.57
MU_HI = 4.0
ORBIT_STEPS = 64
ORBIT_X0 = 0.1  # inside the chaotic basin for the whole mu range; 0.5 dies at mu=4
SG_WINDOW = 99
SG_POLYORDER = 3
ENTROPY_BINS = 16

ORBIT_STATS = ("peak", "var", "entropy", "range", "autocorr", "mean")
KINDS = (
    "logistic_orbit_stat",
    "sinusoid",
    "weierstrass",
    "pure_mag_transform",
    "random_monotone_spline",
    "bump",
)
PURE_MAG_TRANSFORMS = ("sin3pi", "abs_sin5pi", "triangle", "parabola")
BUMP_SHAPES = ("gaussian", "hat", "cosine", "dual_gaussian")

_WEIER_TERMS = 8
_WEIER_A = 0.5
_WEIER_B = 7.0
# distinct sub-streams so the same (seed, salt) never collides across kinds
_STREAM_WEIER = 86243
_STREAM_SPLINE = 52391


@dataclass(frozen=True)
class FeatureSpec:
    """One feature column: a generator kind plus its parameters."""

    kind: str
    stat: str | None = None          # logistic_orbit_stat
    smooth: bool = False             # logistic_orbit_stat
    frequency: float | None = None   # sinusoid: sin(frequency * pi * t)
    transform: str | None = None     # pure_mag_transform
    shape: str | None = None         # bump
    center: float | None = None      # bump
    width: float | None = None       # bump: sigma (gaussian) or half-width
    center2: float | None = None     # bump: dual_gaussian second center
    knots: int = 20                  # random_monotone_spline
    salt: int = 0                    # seeded kinds: independent column stream

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise UnknownKindError(f"unknown feature kind {self.kind!r}")
        if self.kind == "logistic_orbit_stat":
            if self.stat not in ORBIT_STATS:
                raise UnknownKindError(f"unknown orbit statistic {self.stat!r}")
        elif self.kind == "sinusoid":
            if not self.frequency or self.frequency <= 0:
                raise OutOfRangeError("sinusoid needs a positive frequency")
        elif self.kind == "pure_mag_transform":
            if self.transform not in PURE_MAG_TRANSFORMS:
                raise UnknownKindError(f"unknown transform {self.transform!r}")
        elif self.kind == "random_monotone_spline":
            if self.knots < 4:
                raise OutOfRangeError("spline needs at least 4 knots")
        elif self.kind == "bump":
            if self.shape not in BUMP_SHAPES:
                raise UnknownKindError(f"unknown bump shape {self.shape!r}")
            if self.center is None or not (0.1 <= self.center <= 1.0):
                raise OutOfRangeError("bump center must lie in [0.1, 1.0]")
            if self.width is None or self.width <= 0:
                raise OutOfRangeError("bump width must be positive")
            if self.shape == "dual_gaussian" and self.center2 is None:
                raise OutOfRangeError("dual_gaussian needs center2")

    @property
    def name(self) -> str:
        if self.kind == "logistic_orbit_stat":
            return f"{self.stat}_smooth" if self.smooth else f"{self.stat}_raw"
        if self.kind == "sinusoid":
            f = self.frequency
            return f"sin{int(f) if float(f).is_integer() else f}pi"
        if self.kind == "weierstrass":
            return f"weier{self.salt}"
        if self.kind == "pure_mag_transform":
            return f"mag_{self.transform}"
        if self.kind == "random_monotone_spline":
            return f"monospline{self.salt}"
        if self.kind == "bump":
            if self.shape == "dual_gaussian":
                return f"bump_dual{self.center:g}_{self.center2:g}"
            return f"bump_{self.shape}{self.center:g}"
        raise UnknownKindError(self.kind)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for key in (
            "stat", "smooth", "frequency", "transform", "shape",
            "center", "width", "center2", "knots", "salt",
        ):
            val = getattr(self, key)
            default = FeatureSpec.__dataclass_fields__[key].default
            if val != default:
                out[key] = val
        return out

    @classmethod
    def from_dict(cls, doc: Mapping) -> "FeatureSpec":
        return cls(**dict(doc))


@dataclass(frozen=True)
class FeatureMatrix:
    """channels x D matrix of strictly positive feature values.

    Rows follow profile layer order; `layer_slices` maps each layer to its
    row block.
    """

    names: tuple[str, ...]
    values: np.ndarray
    layer_ids: tuple[str, ...]
    layer_slices: Mapping[str, slice]

    def __post_init__(self) -> None:
        if self.values.ndim != 2 or self.values.shape[1] < 1:
            raise NonPositiveFeatureError("feature matrix needs at least one column")
        if not np.all(self.values > 0):
            raise NonPositiveFeatureError("feature matrix entries must be > 0")

    @property
    def column_count(self) -> int:
        return int(self.values.shape[1])

    def layer_block(self, layer_id: str) -> np.ndarray:
        return self.values[self.layer_slices[layer_id]]


def rank_to_mu(rank_value):
    """Affine map from the [0.1, 1.0] rank grid onto mu in [3.57, 4.0]."""
    r = np.asarray(rank_value, dtype=np.float64)
    if np.any(r < 0.1) or np.any(r > 1.0):
        raise OutOfRangeError("rank value outside [0.1, 1.0]")
    mu = MU_LO + (MU_HI - MU_LO) * (r - 0.1) / 0.9
    return float(mu) if np.isscalar(rank_value) else mu


def logistic_orbit(mu: float, steps: int, x0: float = ORBIT_X0) -> np.ndarray:
    """Iterates x_1..x_steps of x -> mu*x*(1-x) starting from x0."""
    if not (0.0 < x0 < 1.0):
        raise InvalidInitError(f"x0 must be in (0, 1), got {x0}")
    if steps < 1:
        raise OutOfRangeError("steps must be >= 1")
    if not (0.0 < mu <= 4.0):
        raise OutOfRangeError(f"mu must be in (0, 4], got {mu}")
    out = np.empty(steps, dtype=np.float64)
    x = x0
    for i in range(steps):
        x = mu * x * (1.0 - x)
        out[i] = x
    return out


def _orbit_matrix(mu: np.ndarray, steps: int = ORBIT_STEPS, x0: float = ORBIT_X0) -> np.ndarray:
    """steps x n matrix of orbits, one column per mu."""
    x = np.full(mu.shape[0], x0, dtype=np.float64)
    out = np.empty((steps, mu.shape[0]), dtype=np.float64)
    for i in range(steps):
        x = mu * x * (1.0 - x)
        out[i] = x
    return out


def _matrix_statistic(orbits: np.ndarray, stat: str) -> np.ndarray:
    if orbits.shape[0] < 2:
        raise TooShortError("orbit statistics need length >= 2")
    if stat == "peak":
        return orbits.max(axis=0)
    if stat == "range":
        return orbits.max(axis=0) - orbits.min(axis=0)
    if stat == "mean":
        return orbits.mean(axis=0)
    if stat == "var":
        return orbits.var(axis=0)
    if stat == "entropy":
        steps, n = orbits.shape
        bins = np.clip((orbits * ENTROPY_BINS).astype(np.int64), 0, ENTROPY_BINS - 1)
        codes = bins + ENTROPY_BINS * np.arange(n)[None, :]
        counts = np.bincount(codes.ravel(), minlength=ENTROPY_BINS * n)
        p = counts.reshape(n, ENTROPY_BINS) / steps
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(p > 0, p * np.log(p), 0.0)
        return -terms.sum(axis=1)
    if stat == "autocorr":
        a = orbits[:-1]
        b = orbits[1:]
        am = a - a.mean(axis=0)
        bm = b - b.mean(axis=0)
        num = (am * bm).mean(axis=0)
        den = a.std(axis=0) * b.std(axis=0)
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    raise UnknownKindError(f"unknown orbit statistic {stat!r}")


def orbit_statistic(orbit: np.ndarray, stat: str) -> float:
    """Scalar summary of one orbit: peak, var, entropy, range, autocorr, mean."""
    orbit = np.asarray(orbit, dtype=np.float64)
    if orbit.ndim != 1 or orbit.shape[0] < 2:
        raise TooShortError("orbit must be a vector of length >= 2")
    return float(_matrix_statistic(orbit[:, None], stat)[0])


def savgol_smooth(values: np.ndarray, window: int = SG_WINDOW, polyorder: int = SG_POLYORDER) -> np.ndarray:
    """Least-squares Savitzky-Golay smoothing with mirror-padded boundaries."""
    values = np.asarray(values, dtype=np.float64)
    if window % 2 == 0 or window <= polyorder or polyorder < 0:
        raise BadWindowError(
            f"window must be odd and > polyorder, got window={window} polyorder={polyorder}"
        )
    if values.shape[0] < window:
        raise WindowTooLargeError(
            f"input length {values.shape[0]} shorter than window {window}"
        )
    return savgol_filter(values, window, polyorder, mode="mirror")


def spearman(x: np.ndarray, y: np.ndarray) -> tuple[float, bool]:
    """Spearman rho with average ranks for ties.

    Returns (rho, degenerate); degenerate inputs (either vector constant)
    yield rho 0.0 with the flag set.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.shape[0] < 2:
        raise OutOfRangeError("spearman needs two equal-length vectors (n >= 2)")
    rx = rankdata(x)
    ry = rankdata(y)
    sx = rx.std()
    sy = ry.std()
    if sx == 0.0 or sy == 0.0:
        return 0.0, True
    rho = float(((rx - rx.mean()) * (ry - ry.mean())).mean() / (sx * sy))
    return rho, False


def isotonic_fit(values: np.ndarray) -> np.ndarray:
    """Best nondecreasing least-squares fit (pool adjacent violators)."""
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    means = np.empty(n)
    counts = np.empty(n, dtype=np.int64)
    top = 0
    for v in values:
        means[top] = v
        counts[top] = 1
        top += 1
        while top > 1 and means[top - 2] > means[top - 1]:
            total = counts[top - 2] + counts[top - 1]
            means[top - 2] = (
                means[top - 2] * counts[top - 2] + means[top - 1] * counts[top - 1]
            ) / total
            counts[top - 2] = total
            top -= 1
    return np.repeat(means[:top], counts[:top])


def isotonic_residual(feature: np.ndarray, rank: np.ndarray) -> np.ndarray:
    """feature minus its monotone-nondecreasing fit over rank order."""
    feature = np.asarray(feature, dtype=np.float64)
    rank = np.asarray(rank, dtype=np.float64)
    if feature.shape != rank.shape:
        raise OutOfRangeError("feature and rank must have equal length")
    order = np.argsort(rank, kind="stable")
    fit_sorted = isotonic_fit(feature[order])
    fit = np.empty_like(fit_sorted)
    fit[order] = fit_sorted
    return feature - fit


def _normalized_t(ranks: np.ndarray) -> np.ndarray:
    mu = rank_to_mu(ranks)
    return (mu - MU_LO) / (MU_HI - MU_LO)


def _triangle_wave(r: np.ndarray, period: float = 0.4) -> np.ndarray:
    phase = r / period
    return 2.0 * np.abs(phase - np.floor(phase + 0.5))


def _bump_values(spec: FeatureSpec, r: np.ndarray) -> np.ndarray:
    c, w = spec.center, spec.width
    if spec.shape == "gaussian":
        return np.exp(-((r - c) ** 2) / (2.0 * w * w))
    if spec.shape == "hat":
        return np.maximum(0.0, 1.0 - np.abs(r - c) / w)
    if spec.shape == "cosine":
        inside = np.abs(r - c) <= w
        return np.where(inside, 0.5 * (1.0 + np.cos(np.pi * (r - c) / w)), 0.0)
    if spec.shape == "dual_gaussian":
        return np.exp(-((r - c) ** 2) / (2.0 * w * w)) + np.exp(
            -((r - spec.center2) ** 2) / (2.0 * w * w)
        )
    raise UnknownKindError(spec.shape)


def _raw_layer_values(spec: FeatureSpec, ranks: np.ndarray, seed: Seed) -> np.ndarray:
    """Feature values before re-ranking, for one layer's rank vector."""
    if spec.kind == "logistic_orbit_stat":
        mu = rank_to_mu(ranks)
        vals = _matrix_statistic(_orbit_matrix(mu), spec.stat)
        if spec.smooth:
            order = np.argsort(mu, kind="stable")
            smoothed = savgol_smooth(vals[order])
            out = np.empty_like(smoothed)
            out[order] = smoothed
            vals = out
        return vals
    if spec.kind == "sinusoid":
        return np.sin(spec.frequency * np.pi * _normalized_t(ranks))
    if spec.kind == "weierstrass":
        rng = np.random.default_rng([seed.value, _STREAM_WEIER, spec.salt])
        phases = rng.uniform(0.0, 2.0 * np.pi, _WEIER_TERMS)
        t = _normalized_t(ranks)
        vals = np.zeros_like(t)
        for k in range(_WEIER_TERMS):
            vals += _WEIER_A**k * np.cos(_WEIER_B**k * np.pi * t + phases[k])
        return vals
    if spec.kind == "pure_mag_transform":
        if spec.transform == "sin3pi":
            return np.sin(3.0 * np.pi * ranks)
        if spec.transform == "abs_sin5pi":
            return np.abs(np.sin(5.0 * np.pi * ranks))
        if spec.transform == "triangle":
            return _triangle_wave(ranks)
        return 4.0 * ranks * (1.0 - ranks)
    if spec.kind == "random_monotone_spline":
        rng = np.random.default_rng([seed.value, _STREAM_SPLINE, spec.salt])
        knot_x = np.linspace(0.1, 1.0, spec.knots)
        knot_y = np.cumsum(rng.uniform(0.05, 1.0, spec.knots))
        return PchipInterpolator(knot_x, knot_y)(ranks)
    if spec.kind == "bump":
        return _bump_values(spec, ranks)
    raise UnknownKindError(spec.kind)


def build_feature(rank_map: RankMap, spec: FeatureSpec, seed: Seed) -> dict[str, np.ndarray]:
    """One feature column per layer, re-ranked onto the [0.1, 1.0] grid."""
    out: dict[str, np.ndarray] = {}
    for lid, ranks in rank_map.values.items():
        out[lid] = rank_normalize(_raw_layer_values(spec, ranks, seed))
    return out


def feature_shape(spec: FeatureSpec, ranks: np.ndarray, seed: Seed = Seed(0)) -> np.ndarray:
    """Raw (pre-re-rank) feature values on an ascending rank grid.

    This is the rank-space shape the complexity analysis operates on; the
    grid must be sorted so smoothing sees mu order.
    """
    ranks = np.asarray(ranks, dtype=np.float64)
    if np.any(np.diff(ranks) < 0):
        raise OutOfRangeError("feature_shape expects an ascending rank grid")
    return _raw_layer_values(spec, ranks, seed)


def build_feature_matrix(
    profile: ModelProfile,
    rank_map: RankMap,
    specs: list[FeatureSpec] | tuple[FeatureSpec, ...],
    seed: Seed,
) -> FeatureMatrix:
    """Assemble columns for all specs into one channels x D matrix."""
    if not specs:
        raise UnknownKindError("need at least one feature spec")
    slices: dict[str, slice] = {}
    offset = 0
    for layer in profile.layers:
        slices[layer.layer_id] = slice(offset, offset + layer.channels)
        offset += layer.channels

    values = np.empty((offset, len(specs)), dtype=np.float64)
    names = []
    for j, spec in enumerate(specs):
        column = build_feature(rank_map, spec, seed)
        for lid, sl in slices.items():
            values[sl, j] = column[lid]
        names.append(spec.name)
    values.flags.writeable = False
    return FeatureMatrix(
        names=tuple(names),
        values=values,
        layer_ids=profile.layer_ids,
        layer_slices=slices,
    )

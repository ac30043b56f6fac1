"""Built-in scorer variants and their complexity-class assignment.

Each variant is a named bundle of feature specs fused with the gradient
backbone. The class map drives the analysis layer: the anchor estimates the
plateau, the kappa0 group holds the other rank-monotone scorers, kappa1 the
smoothed non-monotone scorers, kappa2 the raw wiggle-rich ones, and controls
are reported but never feed escape deltas.
"""
from __future__ import annotations

from dataclasses import dataclass

from .features import FeatureSpec

__all__ = ["Variant", "builtin_variants", "default_class_map", "DEFAULT_GRID_VARIANTS"]

# Weierstrass column streams whose realized phase draws sit in the
# low-|rank-correlation| regime under the default seed (see docs).
_WEIER_SALTS = (7, 14, 40, 56)


@dataclass(frozen=True)
class Variant:
    name: str
    kappa_class: str  # anchor | kappa0 | kappa1 | kappa2 | control
    specs: tuple[FeatureSpec, ...]


def _orbit(stat: str, smooth: bool) -> FeatureSpec:
    return FeatureSpec(kind="logistic_orbit_stat", stat=stat, smooth=smooth)


def builtin_variants() -> dict[str, Variant]:
    v: list[Variant] = [
        # bare gradient backbone, no feature columns, fixed weight 1
        Variant("taylor", "baseline", ()),
        # rank-monotone scorers (identical top-k sets by construction)
        Variant("V1a", "anchor", (_orbit("peak", True),)),
        Variant("V1d", "kappa0", (_orbit("range", True),)),
        Variant(
            "RandomSpline",
            "kappa0",
            tuple(
                FeatureSpec(kind="random_monotone_spline", salt=s) for s in range(4)
            ),
        ),
        # smooth non-monotone
        Variant("V1b", "kappa1", (_orbit("var", True),)),
        Variant("V1c", "kappa1", (_orbit("entropy", True),)),
        Variant(
            "V1",
            "kappa1",
            tuple(_orbit(s, True) for s in ("peak", "var", "entropy", "range")),
        ),
        Variant(
            "A5_Log6_smooth",
            "kappa1",
            tuple(
                _orbit(s, True)
                for s in ("peak", "var", "entropy", "range", "autocorr", "mean")
            ),
        ),
        # raw, wiggle-rich
        Variant(
            "A5",
            "kappa2",
            tuple(_orbit(s, False) for s in ("peak", "var", "entropy", "range")),
        ),
        Variant(
            "A5_Log6",
            "kappa2",
            tuple(
                _orbit(s, False)
                for s in ("peak", "var", "entropy", "range", "autocorr", "mean")
            ),
        ),
        # non-monotone controls
        Variant(
            "NL_sin",
            "control",
            tuple(FeatureSpec(kind="sinusoid", frequency=f) for f in (5, 10, 20, 50)),
        ),
        Variant(
            "Weier4",
            "control",
            tuple(FeatureSpec(kind="weierstrass", salt=s) for s in _WEIER_SALTS),
        ),
        Variant(
            "PureMag4",
            "control",
            tuple(
                FeatureSpec(kind="pure_mag_transform", transform=t)
                for t in ("sin3pi", "abs_sin5pi", "triangle", "parabola")
            ),
        ),
        # handcrafted boundary bumps
        Variant(
            "HandBumpGauss70",
            "control",
            (FeatureSpec(kind="bump", shape="gaussian", center=0.7, width=0.05),),
        ),
        Variant(
            "HandBumpHat70",
            "control",
            (FeatureSpec(kind="bump", shape="hat", center=0.7, width=0.10),),
        ),
        Variant(
            "HandBumpCos70",
            "control",
            (FeatureSpec(kind="bump", shape="cosine", center=0.7, width=0.10),),
        ),
        Variant(
            "HandBumpGaussDual",
            "control",
            (
                FeatureSpec(
                    kind="bump",
                    shape="dual_gaussian",
                    center=0.3,
                    center2=0.7,
                    width=0.05,
                ),
            ),
        ),
    ]
    return {variant.name: variant for variant in v}


# the standard 9-variant experiment grid
DEFAULT_GRID_VARIANTS = (
    "V1a",
    "RandomSpline",
    "V1d",
    "V1b",
    "V1",
    "A5",
    "A5_Log6",
    "NL_sin",
    "PureMag4",
)


def default_class_map(variant_names=DEFAULT_GRID_VARIANTS) -> dict[str, list[str] | str]:
    """anchor/kappa0/kappa1/kappa2/control membership for the given variants."""
    registry = builtin_variants()
    out: dict[str, list[str] | str] = {
        "anchor": "",
        "kappa0": [],
        "kappa1": [],
        "kappa2": [],
        "control": [],
    }
    for name in variant_names:
        cls = registry[name].kappa_class if name in registry else "control"
        if cls == "anchor":
            out["anchor"] = name
        else:
            out[cls].append(name)
    return out

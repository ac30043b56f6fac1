"""Domain types, profile validation, and seeding shared by all modules.

A profile is the pruning substrate: per layer, one vector of channel
magnitudes (L2) and one vector of gradient-times-weight importance scores.
All types are immutable after construction (array buffers are frozen) and
safe to share across threads.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    EmptyLayerError,
    LengthMismatchError,
    NegativeValueError,
    NonFiniteError,
    ProfileSchemaError,
)

__all__ = [
    "LayerProfile",
    "ModelProfile",
    "Selection",
    "Seed",
    "Sparsity",
    "profile_to_document",
    "validate_profile",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.asarray(a, dtype=np.float64)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class LayerProfile:
    """One layer's per-channel magnitude and importance vectors."""

    layer_id: str
    magnitude: np.ndarray
    taylor: np.ndarray

    @property
    def channels(self) -> int:
        return int(self.magnitude.shape[0])


@dataclass(frozen=True)
class ModelProfile:
    """Ordered list of layers; the unit every scorer operates on."""

    layers: tuple[LayerProfile, ...]

    @property
    def layer_ids(self) -> tuple[str, ...]:
        return tuple(l.layer_id for l in self.layers)

    @property
    def total_channels(self) -> int:
        return sum(l.channels for l in self.layers)

    def layer(self, layer_id: str) -> LayerProfile:
        for l in self.layers:
            if l.layer_id == layer_id:
                return l
        raise KeyError(layer_id)


@dataclass(frozen=True)
class Sparsity:
    """Fraction of channels removed; open interval (0, 1)."""

    value: float

    def __post_init__(self) -> None:
        if not (0.0 < self.value < 1.0):
            raise ValueError(f"sparsity must be in (0, 1), got {self.value}")

    @property
    def keep_fraction(self) -> float:
        return 1.0 - self.value


@dataclass(frozen=True)
class Seed:
    """64-bit unsigned RNG seed."""

    value: int

    def __post_init__(self) -> None:
        if not (0 <= self.value < 2**64):
            raise ValueError(f"seed must fit in uint64, got {self.value}")


@dataclass(frozen=True)
class Selection:
    """Per-layer sets of kept channel indices, sorted ascending."""

    kept: Mapping[str, tuple[int, ...]] = field(default_factory=dict)

    def total_kept(self) -> int:
        return sum(len(v) for v in self.kept.values())

    def masks(self, profile: ModelProfile) -> dict[str, np.ndarray]:
        """0/1 keep-mask per layer, for oracle adapters."""
        out = {}
        for layer in profile.layers:
            m = np.zeros(layer.channels, dtype=np.int8)
            m[list(self.kept.get(layer.layer_id, ()))] = 1
            out[layer.layer_id] = m
        return out

    def to_document(self) -> dict:
        return {"kept": {lid: list(idx) for lid, idx in self.kept.items()}}


def make_selection(kept: Mapping[str, Iterable[int]], profile: ModelProfile) -> Selection:
    """Build a Selection, checking indices are unique and within bounds."""
    clean: dict[str, tuple[int, ...]] = {}
    for layer in profile.layers:
        idx = sorted(int(i) for i in kept.get(layer.layer_id, ()))
        if len(set(idx)) != len(idx):
            raise ValueError(f"duplicate kept index in layer {layer.layer_id!r}")
        if idx and (idx[0] < 0 or idx[-1] >= layer.channels):
            raise ValueError(
                f"kept index out of bounds in layer {layer.layer_id!r}"
            )
        clean[layer.layer_id] = tuple(idx)
    unknown = set(kept) - set(profile.layer_ids)
    if unknown:
        raise ValueError(f"kept references unknown layers: {sorted(unknown)}")
    return Selection(kept=clean)


def _vector(layer_index: int, doc: Mapping, key: str) -> np.ndarray:
    try:
        raw = doc[key]
    except (KeyError, TypeError):
        raise ProfileSchemaError(f"layer {layer_index}: missing {key!r} array")
    if not isinstance(raw, (list, tuple, np.ndarray)):
        raise ProfileSchemaError(f"layer {layer_index}: {key!r} is not an array")
    try:
        vec = np.asarray(raw, dtype=np.float64)
    except (TypeError, ValueError):
        raise ProfileSchemaError(f"layer {layer_index}: {key!r} has non-numeric entries")
    if vec.ndim != 1:
        raise ProfileSchemaError(f"layer {layer_index}: {key!r} is not one-dimensional")
    return vec


def validate_profile(raw) -> ModelProfile:
    """Validate a decoded profile document and freeze it into a ModelProfile.

    Total: every input either yields a profile or raises one specific
    ProfileError subclass.
    """
    if not isinstance(raw, Mapping):
        raise ProfileSchemaError("profile document must be a JSON object")
    layers_raw = raw.get("layers")
    if not isinstance(layers_raw, (list, tuple)) or not layers_raw:
        raise ProfileSchemaError("profile needs a nonempty 'layers' array")

    layers: list[LayerProfile] = []
    seen: set[str] = set()
    for i, ld in enumerate(layers_raw):
        if not isinstance(ld, Mapping):
            raise ProfileSchemaError(f"layer {i}: not an object")
        lid = ld.get("layer_id")
        if not isinstance(lid, str) or not lid:
            raise ProfileSchemaError(f"layer {i}: missing or empty 'layer_id'")
        if lid in seen:
            raise ProfileSchemaError(f"duplicate layer_id {lid!r}")
        seen.add(lid)
        mag = _vector(i, ld, "magnitude")
        tay = _vector(i, ld, "taylor")
        if mag.shape[0] != tay.shape[0]:
            raise LengthMismatchError(
                f"layer {lid!r}: magnitude has {mag.shape[0]} entries, "
                f"taylor has {tay.shape[0]}"
            )
        if mag.shape[0] < 2:
            raise EmptyLayerError(
                f"layer {lid!r} has {mag.shape[0]} channel(s); need at least 2"
            )
        for name, vec in (("magnitude", mag), ("taylor", tay)):
            if not np.all(np.isfinite(vec)):
                raise NonFiniteError(f"layer {lid!r}: non-finite {name} value")
            if np.any(vec < 0):
                raise NegativeValueError(f"layer {lid!r}: negative {name} value")
        layers.append(LayerProfile(lid, _frozen(mag), _frozen(tay)))
    return ModelProfile(layers=tuple(layers))


def profile_to_document(profile: ModelProfile) -> dict:
    """Inverse of validate_profile; floats survive a JSON round-trip exactly."""
    return {
        "layers": [
            {
                "layer_id": l.layer_id,
                "magnitude": l.magnitude.tolist(),
                "taylor": l.taylor.tolist(),
            }
            for l in profile.layers
        ]
    }


def load_profile(path) -> ModelProfile:
    with open(path, "r", encoding="utf-8") as fh:
        return validate_profile(json.load(fh))

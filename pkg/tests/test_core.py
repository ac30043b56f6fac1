import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rankfuse.core import (
    Seed,
    Sparsity,
    make_selection,
    profile_to_document,
    validate_profile,
)
from rankfuse.errors import (
    EmptyLayerError,
    LengthMismatchError,
    NegativeValueError,
    NonFiniteError,
    ProfileError,
    ProfileSchemaError,
)


def layer(lid, mag, tay):
    return {"layer_id": lid, "magnitude": mag, "taylor": tay}


def test_uniform_profile_valid():
    doc = {"layers": [layer("a", [1.0] * 4, [1.0] * 4), layer("b", [1.0] * 4, [1.0] * 4)]}
    prof = validate_profile(doc)
    assert prof.layer_ids == ("a", "b")
    assert prof.total_channels == 8
    assert prof.layer("a").channels == 4


def test_single_channel_layer_rejected():
    doc = {"layers": [layer("a", [1.0], [1.0])]}
    with pytest.raises(EmptyLayerError):
        validate_profile(doc)


def test_length_mismatch_rejected():
    doc = {"layers": [layer("a", [1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0])]}
    with pytest.raises(LengthMismatchError):
        validate_profile(doc)


def test_negative_and_nonfinite_rejected():
    with pytest.raises(NegativeValueError):
        validate_profile({"layers": [layer("a", [1.0, -0.5], [1.0, 1.0])]})
    with pytest.raises(NonFiniteError):
        validate_profile({"layers": [layer("a", [1.0, float("nan")], [1.0, 1.0])]})
    with pytest.raises(NonFiniteError):
        validate_profile({"layers": [layer("a", [1.0, 2.0], [1.0, float("inf")])]})


def test_schema_errors():
    with pytest.raises(ProfileSchemaError):
        validate_profile([])
    with pytest.raises(ProfileSchemaError):
        validate_profile({"layers": []})
    with pytest.raises(ProfileSchemaError):
        validate_profile({"layers": [{"layer_id": "a", "magnitude": [1, 2]}]})
    with pytest.raises(ProfileSchemaError):
        validate_profile(
            {"layers": [layer("a", [1, 2], [1, 2]), layer("a", [1, 2], [1, 2])]}
        )
    with pytest.raises(ProfileSchemaError):
        validate_profile({"layers": [layer("a", [1, "x"], [1, 2])]})


def test_profile_frozen():
    prof = validate_profile({"layers": [layer("a", [1.0, 2.0], [3.0, 4.0])]})
    with pytest.raises(ValueError):
        prof.layers[0].magnitude[0] = 9.0


@st.composite
def profiles(draw):
    n_layers = draw(st.integers(1, 4))
    layers = []
    for i in range(n_layers):
        n = draw(st.integers(2, 12))
        vals = st.floats(0, 1e12, allow_nan=False, allow_infinity=False, width=64)
        layers.append(
            layer(f"L{i}", draw(st.lists(vals, min_size=n, max_size=n)),
                  draw(st.lists(vals, min_size=n, max_size=n)))
        )
    return {"layers": layers}


@settings(max_examples=60, deadline=None)
@given(profiles())
def test_round_trip_identity(doc):
    prof = validate_profile(doc)
    again = validate_profile(json.loads(json.dumps(profile_to_document(prof))))
    for a, b in zip(prof.layers, again.layers):
        assert a.layer_id == b.layer_id
        np.testing.assert_array_equal(a.magnitude, b.magnitude)
        np.testing.assert_array_equal(a.taylor, b.taylor)


@settings(max_examples=60, deadline=None)
@given(
    st.recursive(
        st.one_of(
            st.none(),
            st.integers(),
            st.floats(allow_nan=True, allow_infinity=True),
            st.text(max_size=6),
        ),
        lambda inner: st.one_of(
            st.lists(inner, max_size=4),
            st.dictionaries(st.text(max_size=6), inner, max_size=4),
        ),
        max_leaves=12,
    )
)
def test_validation_is_total(junk):
    # every input yields either a profile or one specific error class
    try:
        validate_profile(junk)
    except ProfileError:
        pass


def test_sparsity_bounds():
    assert Sparsity(0.5).keep_fraction == 0.5
    for bad in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            Sparsity(bad)


def test_seed_bounds():
    Seed(0)
    Seed(2**64 - 1)
    for bad in (-1, 2**64):
        with pytest.raises(ValueError):
            Seed(bad)


def test_selection_helpers():
    prof = validate_profile(
        {"layers": [layer("a", [1, 2, 3], [1, 1, 1]), layer("b", [1, 2], [1, 1])]}
    )
    sel = make_selection({"a": [2, 0], "b": [1]}, prof)
    assert sel.kept["a"] == (0, 2)
    assert sel.total_kept() == 3
    masks = sel.masks(prof)
    assert masks["a"].tolist() == [1, 0, 1]
    assert masks["b"].tolist() == [0, 1]
    with pytest.raises(ValueError):
        make_selection({"a": [0, 0]}, prof)
    with pytest.raises(ValueError):
        make_selection({"a": [3]}, prof)
    with pytest.raises(ValueError):
        make_selection({"zz": [0]}, prof)

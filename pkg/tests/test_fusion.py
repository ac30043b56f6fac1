import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rankfuse.core import Seed, Sparsity, validate_profile
from rankfuse.errors import BudgetExceedsLayerError, MisalignedError
from rankfuse.features import FeatureSpec, build_feature_matrix
from rankfuse.fusion import (
    FusedScorer,
    FusionWeights,
    ScoreVector,
    fuse_scores,
    select_topk,
)
from rankfuse.ranknorm import BudgetVector, allocate_budgets, rank_mm


def make_profile(mags_by_layer, taylor_by_layer=None):
    layers = []
    for i, mags in enumerate(mags_by_layer):
        tay = taylor_by_layer[i] if taylor_by_layer else [1.0] * len(mags)
        layers.append({"layer_id": f"L{i}", "magnitude": list(mags), "taylor": list(tay)})
    return validate_profile({"layers": layers})


def matrix_from_columns(profile, columns_by_layer, names=None):
    """Hand-built feature matrix bypassing the generators."""
    from rankfuse.features import FeatureMatrix

    slices = {}
    offset = 0
    for layer in profile.layers:
        slices[layer.layer_id] = slice(offset, offset + layer.channels)
        offset += layer.channels
    d = len(next(iter(columns_by_layer.values())))
    values = np.empty((offset, d))
    for lid, cols in columns_by_layer.items():
        for j, col in enumerate(cols):
            values[slices[lid], j] = col
    return FeatureMatrix(
        names=tuple(names or [f"c{j}" for j in range(d)]),
        values=values,
        layer_ids=profile.layer_ids,
        layer_slices=slices,
    )


def test_backbone_identity():
    prof = make_profile([[1, 2, 3]], [[0.5, 2.0, 8.0]])
    scores = fuse_scores(prof, None, FusionWeights(w_t=1.0))
    np.testing.assert_allclose(scores.scores()["L0"], [0.5, 2.0, 8.0], rtol=1e-12)


def test_backbone_switched_off():
    prof = make_profile([[1, 2]], [[5.0, 9.0]])
    fm = matrix_from_columns(prof, {"L0": [np.array([0.1, 1.0])]})
    scores = fuse_scores(prof, fm, FusionWeights(w_t=0.0, w=(1.0,)))
    np.testing.assert_allclose(scores.scores()["L0"], [0.1, 1.0], rtol=1e-12)


def test_tie_scores_and_tie_break():
    prof = make_profile([[1, 2]], [[4.0, 1.0]])
    fm = matrix_from_columns(prof, {"L0": [np.array([1.0, 2.0])]})
    scores = fuse_scores(prof, fm, FusionWeights(w_t=1.0, w=(2.0,)))
    np.testing.assert_allclose(scores.scores()["L0"], [4.0, 4.0], rtol=1e-12)
    sel = select_topk(scores, BudgetVector(budgets={"L0": 1}))
    assert sel.kept["L0"] == (0,)


def test_select_topk_basic():
    sv = ScoreVector(log_scores={"L0": np.log(np.array([3.0, 1.0, 2.0]))})
    sel = select_topk(sv, BudgetVector(budgets={"L0": 2}))
    assert sel.kept["L0"] == (0, 2)


def test_select_topk_budget_exceeds_layer():
    sv = ScoreVector(log_scores={"L0": np.zeros(3)})
    with pytest.raises(BudgetExceedsLayerError):
        select_topk(sv, BudgetVector(budgets={"L0": 4}))


def test_epsilon_floor_handles_dead_channels():
    prof = make_profile([[1, 2, 3]], [[0.0, 1.0, 2.0]])
    scores = fuse_scores(prof, None, FusionWeights(w_t=-1.0))
    vec = scores.log_scores["L0"]
    assert np.all(np.isfinite(vec))
    # dead channel gets the *largest* score under a negative exponent
    assert np.argmax(vec) == 0


def test_misaligned_features_rejected():
    prof = make_profile([[1, 2, 3]])
    other = make_profile([[1, 2, 3, 4]])
    rm = rank_mm(other)
    fm = build_feature_matrix(other, rm, [FeatureSpec(kind="sinusoid", frequency=5)], Seed(0))
    with pytest.raises(MisalignedError):
        fuse_scores(prof, fm, FusionWeights(w_t=1.0, w=(1.0,)))
    with pytest.raises(MisalignedError):
        fuse_scores(prof, None, FusionWeights(w_t=1.0, w=(1.0,)))


def test_weights_bounds_enforced():
    with pytest.raises(ValueError):
        FusionWeights(w_t=41.0)
    with pytest.raises(ValueError):
        FusionWeights(w_t=0.0, w=(-50.0,))
    FusionWeights(w_t=40.0, w=(-40.0,))


# ------------------------------------------------- rank-monotone equivalence

MONOTONE_FUNCS = {
    "identity": lambda r: r,
    "affine": lambda r: 2.5 * r + 0.3,
    "exp": np.exp,
    "cube": lambda r: r**3,
}


def selections_for(profile, f, budgets):
    rm = rank_mm(profile)
    log_scores = {lid: np.log(f(vals)) for lid, vals in rm.values.items()}
    return select_topk(ScoreVector(log_scores=log_scores), budgets)


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.integers(2, 50), min_size=1, max_size=4),
    st.integers(0, 2**32 - 1),
)
def test_lemma_equivalence_property(sizes, seed):
    rng = np.random.default_rng(seed)
    prof = make_profile([rng.random(n) for n in sizes])
    budgets = BudgetVector(
        budgets={f"L{i}": int(rng.integers(1, n)) for i, n in enumerate(sizes)}
    )
    base = selections_for(prof, MONOTONE_FUNCS["identity"], budgets)
    for f in MONOTONE_FUNCS.values():
        assert selections_for(prof, f, budgets).kept == base.kept


def test_positive_scaling_leaves_selection_unchanged():
    rng = np.random.default_rng(3)
    prof = make_profile([rng.random(40)], [rng.random(40) + 0.1])
    rm = rank_mm(prof)
    specs = [
        FeatureSpec(kind="sinusoid", frequency=10),
        FeatureSpec(kind="pure_mag_transform", transform="parabola"),
    ]
    fm = build_feature_matrix(prof, rm, specs, Seed(1))
    weights = FusionWeights(w_t=1.5, w=(2.0, -3.0))
    budgets = allocate_budgets(prof, Sparsity(0.5))
    base = select_topk(fuse_scores(prof, fm, weights), budgets)
    for alpha in (0.001, 7.5, 1e6):
        scaled = matrix_from_columns(
            prof,
            {"L0": [fm.values[:, 0] * alpha, fm.values[:, 1]]},
        )
        got = select_topk(fuse_scores(prof, scaled, weights), budgets)
        assert got.kept == base.kept


def test_log_linear_agreement_for_small_exponents():
    rng = np.random.default_rng(11)
    prof = make_profile([rng.random(30), rng.random(17)])
    rm = rank_mm(prof)
    fm = build_feature_matrix(
        prof,
        rm,
        [FeatureSpec(kind="sinusoid", frequency=20), FeatureSpec(kind="weierstrass", salt=2)],
        Seed(5),
    )
    budgets = BudgetVector(budgets={"L0": 11, "L1": 6})
    for trial in range(20):
        w = rng.uniform(-5, 5, 3)
        weights = FusionWeights(w_t=float(w[0]), w=(float(w[1]), float(w[2])))
        log_sel = select_topk(fuse_scores(prof, fm, weights), budgets)
        # direct linear-space computation
        linear = {}
        for layer in prof.layers:
            block = fm.layer_block(layer.layer_id)
            s = np.maximum(layer.taylor, 1e-12) ** w[0]
            s = s * block[:, 0] ** w[1] * block[:, 1] ** w[2]
            linear[layer.layer_id] = np.log(s)
        lin_sel = select_topk(ScoreVector(log_scores=linear), budgets)
        assert log_sel.kept == lin_sel.kept


def test_determinism_bit_identical():
    rng = np.random.default_rng(8)
    prof = make_profile([rng.random(64)], [rng.random(64)])
    rm = rank_mm(prof)
    fm = build_feature_matrix(
        prof, rm, [FeatureSpec(kind="logistic_orbit_stat", stat="var")], Seed(4)
    )
    weights = FusionWeights(w_t=3.0, w=(-7.0,))
    budgets = allocate_budgets(prof, Sparsity(0.7))
    a = select_topk(fuse_scores(prof, fm, weights), budgets)
    b = select_topk(fuse_scores(prof, fm, weights), budgets)
    assert a.kept == b.kept

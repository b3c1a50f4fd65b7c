import numpy as np
import pytest
from hypothesis import given, seed
from hypothesis import settings as hyp_settings
from hypothesis import strategies as st

from config import SearchSettings
from constructions import make_dsum_inf, make_dsum_one, make_quotient, make_subspace
from fault_tolerance import DescriptorError, DimensionError, StructureError
from ground import lp, opmatrix
from matcore import crandn, mat_apply, op_norm, random_unitary
from sqoperators import amplify_apply, canonical_projection
from sqspaces import (
    ElementColumn,
    NormEstimate,
    SeqSpaceDesc,
    amp_norm,
    cstar_diag,
    cstar_matrix,
    cstar_norm,
    dsum_inf_norm,
    dsum_one_norm,
    dual_desc,
    dual_norm,
    evaluate,
    evaluate_dual,
    hilb_max,
    hilb_norm,
    is_maximal,
    is_minimal,
    level_norm,
    max_norm,
    min_norm,
    min_space,
    max_space,
    pairing_amplify,
    quotient_norm,
    replay_witness,
    structure_kind,
    subspace_norm,
    t2,
    t2n_norm,
)

SEEDS = st.integers(min_value=0, max_value=2**32 - 1)
SMALL = SearchSettings(ascent_restarts=4, ascent_steps=40, factor_restarts=2, factor_rounds=4)
EXACT_SPACES = [
    hilb_max(3),
    t2(3),
    min_space(lp(2, 3)),
    min_space(lp("inf", 3)),
    cstar_matrix(2),
    cstar_diag(4),
]


# ---- 描述符 ----


def test_descriptor_validation():
    with pytest.raises(DescriptorError):
        SeqSpaceDesc("hilbmax", ground=lp(1, 2))
    with pytest.raises(DescriptorError):
        SeqSpaceDesc("dsum_one", children=())
    with pytest.raises(DescriptorError):
        SeqSpaceDesc("banach", ground=lp(2, 2))
    with pytest.raises(DescriptorError):
        make_quotient(hilb_max(2), np.eye(2))
    with pytest.raises(DescriptorError):
        make_subspace(hilb_max(3), np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]]))


def test_dimensions():
    assert make_dsum_one([t2(1), hilb_max(2)]).dim == 3
    assert make_quotient(hilb_max(3), np.eye(3)[:, :1]).dim == 2
    assert make_subspace(hilb_max(3), np.eye(3)[:, :2]).dim == 2
    assert dual_desc(cstar_matrix(2)).dim == 4


def test_element_column_shape_checked():
    with pytest.raises(DimensionError):
        ElementColumn(hilb_max(2), np.ones((3, 1)))
    with pytest.raises(DimensionError):
        evaluate(hilb_max(2), np.ones((3, 1)), SMALL)


def test_structure_classification():
    assert structure_kind(hilb_max(2)) == "frob"
    assert structure_kind(t2(2)) == "spec"
    assert structure_kind(dual_desc(t2(2))) == "frob"
    assert structure_kind(min_space(lp(1, 2))) is None
    assert is_minimal(cstar_diag(2)) and is_maximal(hilb_max(2))
    assert is_minimal(dual_desc(max_space(lp(1, 2))))


# ---- 精确结构 ----


def test_hilbmax_orthonormal_pair():
    estimate = hilb_norm(ElementColumn(hilb_max(2), np.eye(2)), SMALL)
    assert estimate.exact
    assert estimate.lower == pytest.approx(np.sqrt(2))
    assert estimate.upper == pytest.approx(np.sqrt(2))


def test_zero_element_is_exact():
    estimate = amp_norm(ElementColumn(max_space(lp(1, 3)), np.zeros((3, 2))), SMALL)
    assert (estimate.lower, estimate.upper, estimate.exact) == (0.0, 0.0, True)
    assert estimate.witness.kind == "zero"


def test_min_structures(rng):
    x = crandn((3, 2), rng)
    assert amp_norm(ElementColumn(t2(3), x), SMALL).upper == pytest.approx(op_norm(x))
    rows = np.max(np.linalg.norm(x, axis=1))
    estimate = amp_norm(ElementColumn(min_space(lp("inf", 3)), x), SMALL)
    assert estimate.exact and estimate.upper == pytest.approx(rows)
    diag = amp_norm(ElementColumn(cstar_diag(3), x), SMALL)
    assert diag.upper == pytest.approx(estimate.upper)


def test_cstar_matrix_is_stacked_spectral_norm(rng):
    x = crandn((4, 3), rng)
    blocks = [x[:, j].reshape(2, 2) for j in range(3)]
    expected = np.sqrt(op_norm(sum(b.conj().T @ b for b in blocks)))
    estimate = amp_norm(ElementColumn(cstar_matrix(2), x), SMALL)
    assert estimate.exact
    assert estimate.upper == pytest.approx(expected)


@seed(5)
@hyp_settings(max_examples=25, deadline=None)
@given(SEEDS, st.sampled_from(range(len(EXACT_SPACES))), st.integers(1, 3), st.integers(1, 3))
def test_ruan_axioms_on_exact_spaces(s, index, n, m):
    space = EXACT_SPACES[index]
    rng = np.random.default_rng(s)
    x = crandn((space.dim, n), rng)
    y = crandn((space.dim, m), rng)
    alpha = crandn((m, n), rng)
    nx = evaluate(space, x, SMALL).upper
    ny = evaluate(space, y, SMALL).upper
    moved = evaluate(space, mat_apply(alpha, x), SMALL).upper
    assert moved <= op_norm(alpha) * nx * (1 + 1e-9) + 1e-12
    joined = evaluate(space, np.hstack([x, y]), SMALL).upper
    assert joined <= np.sqrt(nx**2 + ny**2) * (1 + 1e-9)


@seed(6)
@hyp_settings(max_examples=25, deadline=None)
@given(SEEDS, st.sampled_from(range(len(EXACT_SPACES))), st.integers(1, 3))
def test_padding_and_unitary_invariance(s, index, n):
    space = EXACT_SPACES[index]
    rng = np.random.default_rng(s)
    x = crandn((space.dim, n), rng)
    base = evaluate(space, x, SMALL).upper
    padded = evaluate(space, np.hstack([x, np.zeros((space.dim, 2))]), SMALL).upper
    rotated = evaluate(space, mat_apply(random_unitary(n, rng), x), SMALL).upper
    assert padded == pytest.approx(base, rel=1e-9)
    assert rotated == pytest.approx(base, rel=1e-9)


# ---- 极大结构与直和 ----


def test_max_l1_orthonormal_pair_is_exact():
    estimate = max_norm(ElementColumn(max_space(lp(1, 2)), np.eye(2)), SMALL)
    assert estimate.lower >= np.sqrt(2) - 1e-9
    assert estimate.upper <= np.sqrt(2) + 1e-9


def test_l1_sum_of_lines_pinches_sqrt2(settings):
    space = make_dsum_one([t2(1), t2(1)])
    estimate = amp_norm(ElementColumn(space, np.eye(2)), settings)
    assert estimate.lower >= 0.95 * np.sqrt(2)
    assert estimate.upper <= 1.05 * np.sqrt(2)


def test_inf_sum_is_max_of_components(rng):
    space = make_dsum_inf([hilb_max(2), t2(2)])
    x = crandn((4, 2), rng)
    estimate = amp_norm(ElementColumn(space, x), SMALL)
    expected = max(np.linalg.norm(x[:2]), op_norm(x[2:]))
    assert estimate.exact
    assert estimate.upper == pytest.approx(expected)


def test_singleton_sum_matches_child(rng):
    x = crandn((3, 2), rng)
    child = evaluate(hilb_max(3), x, SMALL)
    wrapped = evaluate(make_dsum_inf([hilb_max(3)]), x, SMALL)
    assert wrapped.upper == pytest.approx(child.upper)


@pytest.mark.parametrize(
    "space",
    [
        hilb_max(3),
        min_space(lp(1, 3)),
        max_space(lp(1, 2)),
        cstar_matrix(2),
        make_dsum_one([t2(1), hilb_max(2)]),
        make_quotient(hilb_max(3), np.eye(3)[:, :1]),
    ],
    ids=lambda s: s.describe(),
)
def test_witness_replays_lower_bound(space, rng):
    x = crandn((space.dim, 2), rng)
    estimate = evaluate(space, x, SMALL)
    assert estimate.lower <= estimate.upper
    assert replay_witness(x, estimate) == pytest.approx(estimate.lower, rel=1e-9)


# ---- 子空间与商空间 ----


def test_quotient_by_line():
    space = hilb_max(2)
    quotient = make_quotient(space, np.array([[0.0], [1.0]]))
    coset = amplify_apply(canonical_projection(quotient), ElementColumn(space, [[3.0], [4.0]]))
    estimate = amp_norm(coset, SearchSettings(ascent_restarts=4, ascent_steps=40))
    assert estimate.lower == pytest.approx(3.0, abs=1e-6)
    assert estimate.upper == pytest.approx(3.0, abs=1e-6)


def test_trivial_quotient_keeps_norm(rng):
    x = crandn((3, 2), rng)
    quotient = make_quotient(hilb_max(3), np.zeros((3, 0)))
    estimate = evaluate(quotient, x, SMALL)
    assert estimate.lower == pytest.approx(np.linalg.norm(x), rel=1e-9)
    assert estimate.upper == pytest.approx(np.linalg.norm(x), rel=1e-9)


def test_orthonormal_subspace_of_hilbmax(rng):
    basis = random_unitary(3, rng)[:, :2]
    sub = make_subspace(hilb_max(3), basis)
    x = crandn((2, 2), rng)
    estimate = evaluate(sub, x, SMALL)
    assert estimate.upper == pytest.approx(np.linalg.norm(x), rel=1e-9)
    dual = evaluate_dual(sub, x, SMALL)
    assert dual.upper == pytest.approx(op_norm(x), rel=1e-9)
    assert dual.lower <= dual.upper


# ---- 对偶 ----


def test_dual_of_column_space_is_frobenius(rng):
    f = crandn((3, 2), rng)
    structural = dual_norm(t2(3), f, SMALL)
    assert structural.upper == pytest.approx(np.linalg.norm(f))
    paired = dual_norm(t2(3), f, SMALL, route="pairing")
    assert paired.lower == pytest.approx(np.linalg.norm(f), rel=1e-3)


def test_dual_routes_overlap(rng):
    f = crandn((2, 2), rng)
    space = min_space(lp(1, 2))
    structural = dual_norm(space, f, SMALL)
    paired = dual_norm(space, f, SMALL, route="pairing")
    assert structural.overlaps(paired, tol=1e-6)


def test_unknown_dual_route():
    with pytest.raises(StructureError):
        evaluate_dual(hilb_max(2), np.eye(2), SMALL, route="sideways")


def test_pairing_amplify_is_contractive(rng):
    x = ElementColumn(hilb_max(3), crandn((3, 2), rng))
    f = ElementColumn(dual_desc(hilb_max(3)), crandn((3, 2), rng))
    pairing = pairing_amplify(x, f)
    assert pairing.shape == (4,)
    bound = amp_norm(x, SMALL).upper * amp_norm(f, SMALL).upper
    assert np.linalg.norm(pairing) <= bound * (1 + 1e-9)

    e1 = np.array([[1.0], [0.0]])
    one = pairing_amplify(ElementColumn(hilb_max(2), e1), ElementColumn(dual_desc(hilb_max(2)), e1))
    np.testing.assert_allclose(one, [1.0])


def test_level_norm_is_level_one(rng):
    v = crandn(3, rng)
    space = min_space(lp(1, 3))
    assert level_norm(space, v, SMALL).upper == pytest.approx(np.sum(np.abs(v)))


def test_wrong_structure_rejected():
    with pytest.raises(StructureError):
        hilb_norm(ElementColumn(t2(2), np.eye(2)))


# ---- t₂ⁿ(X) ----


def test_t2n_over_complex_line(settings):
    x = ElementColumn(t2(1), [[3.0, 4.0]])
    plain = t2n_norm(x, settings=settings)
    assert plain.upper == pytest.approx(5.0, rel=1e-9)
    assert plain.lower == pytest.approx(5.0, rel=1e-6)
    invertible = t2n_norm(x, settings=settings, invertible=True)
    assert invertible.upper == pytest.approx(5.0, rel=1e-6)


def test_t2n_level_mismatch():
    with pytest.raises(DimensionError):
        t2n_norm(ElementColumn(hilb_max(2), np.eye(2)), n=3, settings=SMALL)


def test_estimate_helpers():
    estimate = NormEstimate.build(1.0, 1.0 + 1e-12, None, "test")
    assert estimate.exact
    assert estimate.scaled(2.0).upper == pytest.approx(2.0)
    assert estimate.at_level(3).level == 3
    wide = NormEstimate.build(1.0, 2.0, None, "test")
    assert not wide.exact and wide.gap == pytest.approx(1.0) and wide.midpoint == 1.5
    assert wide.overlaps(NormEstimate.build(1.9, 3.0, None, "test"))
    assert not wide.overlaps(NormEstimate.build(2.5, 3.0, None, "test"))


def test_inverted_interval_is_logged(caplog):
    with caplog.at_level("WARNING", logger="OssCalc.SqSpaces"):
        NormEstimate.build(1.0 + 1e-13, 1.0, None, "rounding")
    assert "区间倒置" not in caplog.text

    with caplog.at_level("WARNING", logger="OssCalc.SqSpaces"):
        estimate = NormEstimate.build(2.0, 1.0, None, "broken")
    assert "区间倒置" in caplog.text and "broken" in caplog.text
    assert estimate.upper == 2.0


# ---- 按结构的求值入口 ----

STRUCTURE_CASES = [
    (min_norm, min_space(lp("inf", 3))),
    (min_norm, t2(2)),
    (cstar_norm, cstar_matrix(2)),
    (cstar_norm, cstar_diag(3)),
    (dsum_inf_norm, make_dsum_inf([hilb_max(2), t2(1)])),
    (dsum_one_norm, make_dsum_one([t2(1), t2(1)])),
    (subspace_norm, make_subspace(hilb_max(3), np.eye(3)[:, :2])),
    (quotient_norm, make_quotient(min_space(lp(2, 3)), np.eye(3)[:, 2:])),
]


@pytest.mark.parametrize(
    "evaluator, space", STRUCTURE_CASES, ids=lambda case: getattr(case, "__name__", None)
)
def test_structure_evaluators_match_dispatcher(evaluator, space, rng):
    x = ElementColumn(space, crandn((space.dim, 2), rng))
    estimate = evaluator(x, SMALL)
    direct = amp_norm(x, SMALL)
    assert estimate.lower <= estimate.upper
    assert estimate.upper == pytest.approx(direct.upper)
    assert estimate.lower == pytest.approx(direct.lower)


@pytest.mark.parametrize(
    "evaluator",
    [min_norm, cstar_norm, dsum_inf_norm, dsum_one_norm, subspace_norm, quotient_norm],
)
def test_structure_evaluators_reject_other_tags(evaluator):
    with pytest.raises(StructureError):
        evaluator(ElementColumn(hilb_max(2), np.eye(2)), SMALL)


def test_quotient_of_column_space_by_last_axis(rng):
    quotient = make_quotient(min_space(lp(2, 3)), np.eye(3)[:, 2:])
    for _ in range(5):
        q = crandn((2, 2), rng)
        estimate = quotient_norm(ElementColumn(quotient, q), SMALL)
        assert estimate.upper - estimate.lower <= 0.02 * estimate.upper
        assert estimate.upper == pytest.approx(op_norm(q), rel=1e-6)


# ---- 极小结构 ----

MIN_PAIRS = [
    (max_space(lp(1, 3)), lp(1, 3)),
    (max_space(lp("inf", 2)), lp("inf", 2)),
    (hilb_max(3), lp(2, 3)),
    (cstar_matrix(2), opmatrix(2, 2)),
    (cstar_diag(3), lp("inf", 3)),
    (make_dsum_inf([t2(1), t2(1)]), lp("inf", 2)),
    (make_dsum_one([t2(1), t2(1)]), lp(1, 2)),
]


@seed(8)
@hyp_settings(max_examples=15, deadline=None)
@given(SEEDS, st.sampled_from(range(len(MIN_PAIRS))), st.integers(1, 3))
def test_min_structure_is_smallest(s, index, n):
    space, ground = MIN_PAIRS[index]
    x = crandn((space.dim, n), np.random.default_rng(s))
    smallest = min_norm(ElementColumn(min_space(ground), x), SMALL)
    other = amp_norm(ElementColumn(space, x), SMALL)
    assert smallest.lower <= other.upper + 1e-9

import numpy as np
import pytest

from config import SearchSettings
from constructions import make_dsum_inf, make_dsum_one, make_quotient, make_subspace
from fault_tolerance import DimensionError, StructureError
from ground import lp
from matcore import crandn
from sqoperators import (
    SeqOperator,
    amp_op_norm,
    amplify_apply,
    canonical_inclusion,
    canonical_projection,
    classify,
    column_to_operator,
    compose,
    coproduct_injection,
    dual_operator,
    identity_operator,
    injectivity_constant,
    operator_to_column,
    product_projection,
    replay_operator_witness,
    sb_norm,
    surjectivity_constant,
)
from sqspaces import ElementColumn, hilb_max, min_space, t2

SMALL = SearchSettings(ascent_restarts=4, ascent_steps=40, factor_restarts=2, factor_rounds=4, inj_restarts=3)
DIAG = np.diag([3.0, 4.0])


@pytest.mark.parametrize("domain", [t2(2), min_space(lp(2, 2))], ids=["T2", "Min(l2)"])
def test_column_to_hilbert_levels(domain):
    phi = SeqOperator(domain, hilb_max(2), DIAG)
    assert amp_op_norm(phi, 1, SMALL).upper == pytest.approx(4.0)
    for n in (2, 3):
        estimate = amp_op_norm(phi, n, SMALL)
        assert estimate.lower == pytest.approx(5.0) and estimate.upper == pytest.approx(5.0)
    sb = sb_norm(phi, SMALL)
    assert sb.upper == pytest.approx(5.0) and sb.level == 2


def test_generic_search_matches_closed_form():
    phi = SeqOperator(t2(2), hilb_max(2), DIAG)
    estimate = amp_op_norm(phi, 2, SMALL, closed_forms=False)
    assert estimate.upper <= 5.0 + 1e-9
    assert estimate.lower == pytest.approx(5.0, abs=1e-3)
    assert replay_operator_witness(phi, estimate) == pytest.approx(estimate.lower, rel=1e-9)


def test_functional_norm_is_flat():
    f = np.array([[1.0, -2.0, 1j]])
    phi = SeqOperator(min_space(lp("inf", 3)), t2(1), f)
    for n in (1, 2, 3):
        estimate = amp_op_norm(phi, n, SMALL)
        assert estimate.upper == pytest.approx(4.0, rel=1e-9)
        assert estimate.lower == pytest.approx(4.0, rel=1e-6)


def test_zero_operator_and_bad_level():
    zero = SeqOperator(hilb_max(2), t2(2), np.zeros((2, 2)))
    assert amp_op_norm(zero, 2, SMALL).upper == 0.0
    with pytest.raises(DimensionError):
        amp_op_norm(identity_operator(t2(2)), 0, SMALL)


def test_composition_is_submultiplicative(rng):
    phi = SeqOperator(min_space(lp(1, 2)), hilb_max(3), crandn((3, 2), rng))
    psi = SeqOperator(hilb_max(3), t2(2), crandn((2, 3), rng))
    both = sb_norm(compose(psi, phi), SMALL)
    bound = sb_norm(psi, SMALL).upper * sb_norm(phi, SMALL).upper
    assert both.lower <= bound * (1 + 1e-9)


def test_structural_mismatches():
    phi = identity_operator(hilb_max(2))
    with pytest.raises(StructureError):
        compose(identity_operator(t2(2)), phi)
    with pytest.raises(StructureError):
        amplify_apply(phi, ElementColumn(t2(2), np.eye(2)))
    with pytest.raises(StructureError):
        canonical_projection(hilb_max(2))
    with pytest.raises(StructureError):
        canonical_inclusion(hilb_max(2))
    with pytest.raises(DimensionError):
        SeqOperator(hilb_max(2), t2(3), np.eye(2))


def test_dual_operator_is_antihomomorphism(rng):
    phi = SeqOperator(hilb_max(2), t2(3), crandn((3, 2), rng))
    psi = SeqOperator(t2(3), hilb_max(2), crandn((2, 3), rng))
    left = dual_operator(compose(psi, phi)).matrix
    right = compose(dual_operator(phi), dual_operator(psi)).matrix
    np.testing.assert_allclose(left, right, atol=1e-12)
    np.testing.assert_array_equal(dual_operator(phi).matrix, phi.matrix.T)


def test_column_operator_round_trip(rng):
    x = ElementColumn(hilb_max(3), crandn((3, 2), rng))
    psi = column_to_operator(x)
    assert psi.domain.dim == 2
    np.testing.assert_array_equal(operator_to_column(psi).coords, x.coords)
    image = amplify_apply(psi, ElementColumn(psi.domain, np.eye(2)))
    np.testing.assert_array_equal(image.coords, x.coords)
    with pytest.raises(StructureError):
        operator_to_column(identity_operator(hilb_max(2)))


def test_sum_maps():
    space = make_dsum_one([t2(1), hilb_max(2)])
    inj = coproduct_injection(space, 1)
    assert inj.matrix.shape == (3, 2)
    np.testing.assert_array_equal(inj.matrix[1:], np.eye(2))
    proj = product_projection(make_dsum_inf([t2(1), hilb_max(2)]), 0)
    np.testing.assert_array_equal(proj.matrix, [[1, 0, 0]])
    with pytest.raises(DimensionError):
        coproduct_injection(space, 2)
    line = coproduct_injection(space, 0)
    assert sb_norm(line, SMALL).upper == pytest.approx(1.0)


def test_quotient_and_subspace_maps_are_contractive():
    quotient = make_quotient(hilb_max(3), np.eye(3)[:, :1])
    assert sb_norm(canonical_projection(quotient), SMALL).upper <= 1 + 1e-6
    sub = make_subspace(hilb_max(3), np.eye(3)[:, :2])
    assert sb_norm(canonical_inclusion(sub), SMALL).upper == pytest.approx(1.0)


def test_identity_is_isometric_and_coisometric():
    record = classify(identity_operator(hilb_max(2)), 2, SMALL)
    assert record.isometric and record.coisometric
    for level in record.levels:
        assert level.c_inj == pytest.approx(1.0) and level.c_surj == pytest.approx(1.0)
        assert level.c_inj_certified and level.c_surj_certified


def test_injectivity_of_diagonal():
    phi = SeqOperator(hilb_max(2), hilb_max(2), np.diag([1.0, 0.5]))
    for n in (1, 2, 3):
        value, certified = injectivity_constant(phi, n, SMALL)
        assert certified and value == pytest.approx(2.0)
    record = classify(phi, 2, SMALL)
    assert not record.isometric
    assert all(level.contractive for level in record.levels)


def test_rank_deficient_constants():
    embed = SeqOperator(t2(1), t2(2), np.array([[1.0], [0.0]]))
    assert surjectivity_constant(embed, 1, SMALL) == (np.inf, True)
    value, certified = injectivity_constant(embed, 1, SMALL)
    assert certified and value == pytest.approx(1.0)
    squash = SeqOperator(t2(2), t2(1), np.array([[1.0, 0.0]]))
    assert injectivity_constant(squash, 1, SMALL)[0] == np.inf


def test_uncertified_injectivity_estimate():
    phi = identity_operator(hilb_max(2))
    phi = SeqOperator(hilb_max(2), t2(2), phi.matrix)
    value, certified = injectivity_constant(phi, 1, SMALL)
    assert not certified
    assert value == pytest.approx(1.0, rel=1e-9)

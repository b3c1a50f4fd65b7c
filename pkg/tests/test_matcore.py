import numpy as np
import pytest
from hypothesis import given, seed
from hypothesis import settings as hyp_settings
from hypothesis import strategies as st

from fault_tolerance import DimensionError, InputError
from matcore import (
    as_cmatrix,
    crandn,
    glue_right,
    hs_norm,
    mat_apply,
    nuclear_norm,
    numerical_rank,
    op_norm,
    orthonormal_complement,
    pad_columns,
    polar_decompose,
    random_unitary,
    stack_columns,
    unitary_factor,
)

SEEDS = st.integers(min_value=0, max_value=2**32 - 1)


def test_norms_of_diagonal():
    a = np.diag([3.0, 4.0])
    assert op_norm(a) == pytest.approx(4.0)
    assert hs_norm(a) == pytest.approx(5.0)
    assert nuclear_norm(a) == pytest.approx(7.0)
    assert op_norm(np.zeros((2, 3))) == 0.0


def test_as_cmatrix_shapes_and_finiteness():
    assert as_cmatrix([1, 2, 3]).shape == (3, 1)
    assert as_cmatrix(5).shape == (1, 1)
    assert as_cmatrix([[1, 2]]).dtype == np.complex128
    with pytest.raises(InputError):
        as_cmatrix([[np.nan, 1.0]])
    with pytest.raises(DimensionError):
        as_cmatrix(np.zeros((2, 2, 2)))


@seed(1)
@hyp_settings(max_examples=40, deadline=None)
@given(SEEDS, st.integers(1, 4), st.integers(1, 4))
def test_op_norm_unitary_invariance(s, rows, cols):
    rng = np.random.default_rng(s)
    a = crandn((rows, cols), rng)
    u, v = random_unitary(rows, rng), random_unitary(cols, rng)
    assert abs(op_norm(u @ a @ v) - op_norm(a)) <= 1e-9


@seed(2)
@hyp_settings(max_examples=40, deadline=None)
@given(SEEDS, st.integers(1, 4), st.integers(1, 5))
def test_polar_decomposition(s, rows, cols):
    a = crandn((rows, cols), np.random.default_rng(s))
    pos, rho = polar_decompose(a)
    np.testing.assert_allclose(pos @ rho, a, atol=1e-10)
    np.testing.assert_allclose(pos, pos.conj().T, atol=1e-12)
    assert np.min(np.linalg.eigvalsh(pos)) >= -1e-10
    assert op_norm(rho) <= 1 + 1e-12


def test_random_unitary_is_unitary(rng):
    u = random_unitary(4, rng)
    np.testing.assert_allclose(u.conj().T @ u, np.eye(4), atol=1e-12)


def test_numerical_rank():
    v = np.array([[1.0], [2.0]])
    assert numerical_rank(v @ v.T) == 1
    assert numerical_rank(np.zeros((3, 3))) == 0
    assert numerical_rank(np.eye(3)) == 3


def test_glue_and_stack():
    a, b = np.ones((2, 1)), np.zeros((2, 3))
    assert glue_right([a, b]).shape == (2, 4)
    assert stack_columns(a, b).shape == (2, 4)
    with pytest.raises(DimensionError):
        glue_right([a, np.ones((3, 1))])
    with pytest.raises(DimensionError):
        stack_columns(a, np.ones((3, 1)))
    with pytest.raises(DimensionError):
        glue_right([])


def test_mat_apply_acts_on_columns():
    x = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    alpha = np.array([[0.0, 1.0], [1.0, 1.0], [2.0, 0.0]])
    y = mat_apply(alpha, x)
    np.testing.assert_allclose(y[:, 0], x[:, 1])
    np.testing.assert_allclose(y[:, 1], x[:, 0] + x[:, 1])
    np.testing.assert_allclose(y[:, 2], 2 * x[:, 0])
    with pytest.raises(DimensionError):
        mat_apply(np.eye(3), x)


def test_pad_and_complement(rng):
    a = crandn((3, 1), rng)
    padded = pad_columns(a, 3)
    assert padded.shape == (3, 3)
    assert not np.any(padded[:, 1:])
    assert pad_columns(padded, 2) is padded

    comp = orthonormal_complement(a, 3)
    assert comp.shape == (3, 2)
    np.testing.assert_allclose(comp.conj().T @ comp, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(a.conj().T @ comp, 0, atol=1e-12)
    np.testing.assert_allclose(orthonormal_complement(np.zeros((3, 0)), 3), np.eye(3))


def test_unitary_factor_is_unitary(rng):
    w = unitary_factor(crandn((3, 3), rng))
    np.testing.assert_allclose(w @ w.conj().T, np.eye(3), atol=1e-12)

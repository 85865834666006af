import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from blockgs.blockcore import (
    BlockMatrix,
    cond_2,
    sigma_min,
    spectral_norm,
    tri_solve_left_transposed,
    tri_solve_right,
)

EPS = 2.0**-53


def test_block_matrix_partition():
    x = BlockMatrix(np.arange(24.0).reshape(6, 4), block_width=2)
    assert x.block_count == 2
    assert x.m == 6
    assert x.cols == 4
    assert_allclose(x.block(1), x.data[:, :2])
    assert_allclose(x.block(2), x.data[:, 2:])
    assert_allclose(x.prefix(1), x.data[:, :2])
    assert x.prefix(2).shape == (6, 4)


def test_block_matrix_rejects_bad_shapes():
    with pytest.raises(ValueError):
        BlockMatrix(np.ones((6, 4)), block_width=3)  # 4 not divisible by 3
    with pytest.raises(ValueError):
        BlockMatrix(np.ones((3, 4)), block_width=2)  # wide, not tall
    with pytest.raises(ValueError):
        BlockMatrix(np.ones((6, 4)), block_width=0)
    with pytest.raises(ValueError):
        BlockMatrix(np.ones(6), block_width=1)  # 1-d
    with pytest.raises(IndexError):
        BlockMatrix(np.ones((6, 4)), 2).block(3)
    with pytest.raises(IndexError):
        BlockMatrix(np.ones((6, 4)), 2).block(0)


def test_block_matrix_blocks_are_views():
    x = BlockMatrix(np.zeros((4, 4)), block_width=2)
    x.block(2)[:] = 7.0
    assert np.all(x.data[:, 2:] == 7.0)


def test_spectral_norm_identity():
    assert spectral_norm(np.eye(2)) == pytest.approx(1.0)


def test_spectral_norm_diagonal():
    assert spectral_norm(np.diag([3.0, 1.0])) == pytest.approx(3.0)


def test_spectral_norm_cross_checked_against_bidiagonalization_oracle():
    # Independent SVD path: scipy's gesvd driver (Golub-Kahan
    # bidiagonalization + QR iteration) vs the divide-and-conquer default.
    rng = np.random.default_rng(123)
    a = rng.standard_normal((50, 5))
    oracle = scipy.linalg.svd(a, compute_uv=False, lapack_driver="gesvd")
    assert spectral_norm(a) == pytest.approx(oracle[0], rel=1e-13)
    assert sigma_min(a) == pytest.approx(oracle[-1], rel=1e-13)


def test_norms_reject_non_finite():
    bad = np.array([[1.0, np.nan], [0.0, 1.0]])
    with pytest.raises(ValueError, match="non-finite matrix"):
        spectral_norm(bad)
    with pytest.raises(ValueError, match="non-finite matrix"):
        sigma_min(np.array([[np.inf]]))


def test_sigma_min_trivial_cases():
    assert sigma_min(np.eye(3)) == pytest.approx(1.0)
    assert sigma_min(np.diag([3.0, 1.0])) == pytest.approx(1.0)


def test_sigma_min_exact_rank_deficiency():
    v = np.array([1.0, -2.0, 0.5, 3.0])
    a = np.column_stack([v, 2.0 * v])
    assert sigma_min(a) <= 1e-14 * spectral_norm(a)


def test_cond_2_trivial():
    assert cond_2(np.eye(4)) == pytest.approx(1.0)
    assert cond_2(np.diag([10.0, 0.1])) == pytest.approx(100.0)


def test_cond_2_singular():
    with pytest.raises(ValueError, match="singular matrix, kappa undefined"):
        cond_2(np.zeros((3, 2)))


def test_tri_solve_left_transposed_trivial():
    b = np.arange(6.0).reshape(3, 2)
    assert_allclose(tri_solve_left_transposed(np.eye(3), b), b)
    assert_allclose(
        tri_solve_left_transposed(np.array([[2.0]]), np.array([[4.0]])),
        np.array([[2.0]]),
    )


def test_tri_solve_right_trivial():
    b = np.arange(8.0).reshape(2, 4)
    assert_allclose(tri_solve_right(b, np.eye(4)), b)
    r = np.array([[2.0, 0.0], [0.0, 4.0]])
    assert_allclose(
        tri_solve_right(np.array([[2.0, 4.0]]), r), np.array([[1.0, 1.0]])
    )


def test_tri_solves_reject_zero_diagonal():
    r = np.triu(np.ones((3, 3)))
    r[1, 1] = 0.0
    with pytest.raises(ValueError, match="singular triangular factor"):
        tri_solve_left_transposed(r, np.ones((3, 1)))
    with pytest.raises(ValueError, match="singular triangular factor"):
        tri_solve_right(np.ones((1, 3)), r)


def test_tri_solves_propagate_nan_payload():
    r = np.eye(2)
    b = np.array([[np.nan, 1.0], [0.0, 1.0]])
    z = tri_solve_left_transposed(r, b)
    assert np.isnan(z[0, 0]) and z[1, 1] == 1.0


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_tri_solve_residuals_random(seed):
    rng = np.random.default_rng(seed)
    # Well-conditioned upper triangular factor: dominant diagonal.
    r = np.triu(rng.standard_normal((5, 5))) + 5.0 * np.eye(5)
    b = rng.standard_normal((5, 3))
    z = tri_solve_left_transposed(r, b)
    assert spectral_norm(r.T @ z - b) <= 1e-13 * spectral_norm(b)
    b2 = rng.standard_normal((3, 5))
    z2 = tri_solve_right(b2, r)
    assert spectral_norm(z2 @ r - b2) <= 1e-13 * spectral_norm(b2)


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_norm_order_and_transpose_invariance(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((8, 5))
    smax, smin = spectral_norm(a), sigma_min(a)
    assert smin <= smax
    assert cond_2(a) >= 1.0
    assert spectral_norm(a.T) == pytest.approx(smax, rel=1e-14)


def test_tri_solve_reconstruction_envelope():
    rng = np.random.default_rng(7)
    r = np.triu(rng.standard_normal((6, 6))) + 4.0 * np.eye(6)
    b = rng.standard_normal((6, 2))
    z = tri_solve_left_transposed(r, b)
    bound = 100.0 * EPS * cond_2(r) * spectral_norm(b)
    assert spectral_norm(r.T @ z - b) <= bound

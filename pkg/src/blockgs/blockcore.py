"""Dense double-precision kernels shared by every orthogonalization routine.

Matrices are plain float64 ``numpy.ndarray`` objects; the only structured type
is :class:`BlockMatrix`, which pins an explicit column partition onto a tall
dense matrix.  Everything here is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "BlockMatrix",
    "as_matrix",
    "spectral_norm",
    "sigma_min",
    "cond_2",
    "tri_solve_left_transposed",
    "tri_solve_right",
]


def as_matrix(a) -> np.ndarray:
    """Coerce ``a`` to a 2-d float64 array in column-major order.

    Copies only when the input is not already a Fortran-ordered float64
    array.  One-dimensional input is rejected rather than promoted, so that
    shape bugs surface at the boundary instead of deep inside a solver.
    """
    out = np.asfortranarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got ndim={out.ndim}")
    return out


@dataclass
class BlockMatrix:
    """A tall m-by-(p*s) matrix partitioned into ``p`` blocks of ``s`` columns.

    Parameters
    ----------
    data : array_like
        The full matrix, m rows by p*s columns, with m >= p*s.
    block_width : int
        Columns per block (``s``).
    block_count : int, optional
        Number of blocks (``p``).  Inferred from the column count when
        omitted; validated against it when given.
    """

    data: np.ndarray
    block_width: int
    block_count: int = 0

    def __post_init__(self) -> None:
        self.data = as_matrix(self.data)
        m, n = self.data.shape
        s = int(self.block_width)
        if s < 1:
            raise ValueError("block_width must be >= 1")
        if self.block_count == 0:
            if n % s != 0:
                raise ValueError(
                    f"column count {n} is not a multiple of block width {s}"
                )
            self.block_count = n // s
        p = int(self.block_count)
        if p < 1 or n != p * s:
            raise ValueError(
                f"inconsistent partition: {n} columns != {p} blocks x width {s}"
            )
        if m < n:
            raise ValueError(f"matrix must be tall: {m} rows < {n} columns")
        self.block_width = s
        self.block_count = p

    @property
    def m(self) -> int:
        """Row count."""
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        """Total column count, ``block_count * block_width``."""
        return self.data.shape[1]

    def block(self, k: int) -> np.ndarray:
        """Return block ``k`` (1-indexed) as an m-by-s view."""
        if not 1 <= k <= self.block_count:
            raise IndexError(
                f"block index {k} out of range 1..{self.block_count}"
            )
        s = self.block_width
        return self.data[:, (k - 1) * s : k * s]

    def prefix(self, k: int) -> np.ndarray:
        """Return the first ``k`` blocks as an m-by-(k*s) view."""
        if not 0 <= k <= self.block_count:
            raise IndexError(
                f"prefix length {k} out of range 0..{self.block_count}"
            )
        return self.data[:, : k * self.block_width]


def _singular_values(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if not np.isfinite(a).all():
        raise ValueError("non-finite matrix")
    return np.linalg.svd(a, compute_uv=False)


def spectral_norm(a) -> float:
    """Largest singular value of ``a`` (the induced 2-norm)."""
    return float(_singular_values(a)[0])


def sigma_min(a) -> float:
    """Smallest singular value of ``a``."""
    return float(_singular_values(a)[-1])


def cond_2(a) -> float:
    """2-norm condition number, largest over smallest singular value."""
    sv = _singular_values(a)
    smin = float(sv[-1])
    if smin == 0.0:
        raise ValueError("singular matrix, kappa undefined")
    return float(sv[0]) / smin


def _check_triangle(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValueError("triangular factor must be square")
    if np.any(np.diagonal(r) == 0.0):
        raise ValueError("singular triangular factor")
    return r


def tri_solve_left_transposed(r, b) -> np.ndarray:
    """Solve ``R^T Z = B`` for ``Z`` with ``R`` upper triangular.

    Forward substitution on the transposed factor.  NaN/Inf entries in
    either argument propagate into the result instead of raising, so failed
    upstream computations flow through unchanged.
    """
    r = _check_triangle(r)
    b = np.asarray(b, dtype=np.float64)
    return scipy.linalg.solve_triangular(
        r, b, trans="T", lower=False, check_finite=False
    )


def tri_solve_right(b, r) -> np.ndarray:
    """Solve ``Z R = B`` for ``Z`` with ``R`` upper triangular.

    Back substitution applied from the right (equivalently, forward
    substitution of ``R^T Z^T = B^T``).  Non-finite entries propagate.
    """
    r = _check_triangle(r)
    b = np.asarray(b, dtype=np.float64)
    zt = scipy.linalg.solve_triangular(
        r, b.T, trans="T", lower=False, check_finite=False
    )
    return np.ascontiguousarray(zt.T)

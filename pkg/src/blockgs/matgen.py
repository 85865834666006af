"""Seeded generators for the three conditioning-controlled matrix families.

All randomness flows through the Philox (4x64-10) counter-based generator so
that a (family, dimensions, seed) triple pins down the matrix bit-for-bit
across platforms and implementations.  Uniform variates are 53-bit integer
draws mapped into the open interval (0, 1); Gaussian variates are obtained
from uniforms by the inverse normal CDF — no rejection sampling, so the
stream consumption is deterministic as well.

Families
--------
monomial
    Krylov-style panels [v, A v, ..., A^(t-1) v] for a fixed diagonal A with
    evenly distributed eigenvalues in (0.1, 10); conditioning grows with the
    panel length t.
piled
    A cumulative-sum family: X_1 plus increasingly similar blocks
    X_k = X_{k-1} + Z_k, where every increment Z_k has the same prescribed
    condition number and shrinking spectral norm 1/kappa_z; conditioning
    grows as the increments shrink.
default
    An explicit SVD with log-spaced singular values from 1 down to
    1/kappa_target.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
import scipy.io
from scipy.special import ndtri

from .blockcore import BlockMatrix, cond_2
from .muscles import house_qr

__all__ = [
    "MatrixClassSpec",
    "make_rng",
    "uniform_open",
    "standard_normal",
    "svd_with_cond",
    "gen_default",
    "gen_monomial",
    "gen_piled",
    "calibrate_piled",
    "generate",
    "save_bgsm",
    "load_bgsm",
    "save_matrix_market",
    "load_matrix_market",
]

_TWO53 = float(1 << 53)

MATRIX_CLASSES = ("monomial", "piled", "default")


def make_rng(seed: int) -> np.random.Generator:
    """Philox-keyed generator; the sole randomness source of this module."""
    return np.random.Generator(np.random.Philox(key=int(seed)))


def uniform_open(rng: np.random.Generator, size) -> np.ndarray:
    """Uniform variates in the open interval (0, 1) with 53-bit resolution."""
    ints = rng.integers(1, 1 << 53, size=size, dtype=np.int64)
    return ints.astype(np.float64) / _TWO53


def standard_normal(rng: np.random.Generator, size) -> np.ndarray:
    """Standard normal variates via the inverse CDF of uniform draws."""
    return ndtri(uniform_open(rng, size))


@dataclass(frozen=True)
class MatrixClassSpec:
    """Full description of one generated matrix.

    ``kappa`` is the target condition number for the default family;
    ``t`` is the monomial panel length (must divide p*s, the number of
    panels is then r = p*s/t); ``kappa_x1``/``kappa_z`` are the two piled
    knobs.  Unused parameters may stay at their defaults.
    """

    matrix_class: str
    m: int
    p: int
    s: int
    seed: int
    kappa: float | None = None
    t: int | None = None
    kappa_x1: float = 10.0
    kappa_z: float | None = None

    def __post_init__(self) -> None:
        if self.matrix_class not in MATRIX_CLASSES:
            raise ValueError(f"unknown matrix class {self.matrix_class!r}")
        if self.m < self.p * self.s:
            raise ValueError("matrix must be tall: m >= p*s")
        if self.p < 1 or self.s < 1:
            raise ValueError("need p >= 1 and s >= 1")


def _orthonormal_columns(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    g = standard_normal(rng, (rows, cols))
    return house_qr(g).q


def svd_with_cond(
    rows: int,
    cols: int,
    kappa: float,
    seed: int = 0,
    *,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Matrix with prescribed log-spaced singular values, largest = 1.

    Built as U diag(sigma) V^T with U, V drawn as QR factors of seeded
    Gaussian matrices and sigma log-spaced from 1 down to 1/kappa.  Pass
    ``rng`` to draw from an existing stream instead of ``seed``.
    """
    if rows < cols:
        raise ValueError("matrix must be tall: rows >= cols")
    if kappa < 1.0:
        raise ValueError("kappa must be >= 1")
    if rng is None:
        rng = make_rng(seed)
    u = _orthonormal_columns(rng, rows, cols)
    v = _orthonormal_columns(rng, cols, cols)
    sigma = np.logspace(0.0, -np.log10(kappa), cols)
    return (u * sigma) @ v.T


def gen_default(spec: MatrixClassSpec) -> BlockMatrix:
    """Explicit-SVD family: cond_2 lands within a factor ~2 of the target."""
    if spec.kappa is None:
        raise ValueError("default class needs a kappa target")
    x = svd_with_cond(
        spec.m, spec.p * spec.s, spec.kappa, rng=make_rng(spec.seed)
    )
    return BlockMatrix(x, spec.s, spec.p)


def gen_monomial(spec: MatrixClassSpec) -> BlockMatrix:
    """Krylov-panel family.

    With n = p*s columns and panel length t (sweep index j maps to the j-th
    smallest divisor t of n, with r = n/t panels), the matrix is the
    concatenation of r panels [v_i, A v_i, ..., A^(t-1) v_i] re-partitioned
    into p blocks of width s.  A is diagonal with m eigenvalues evenly
    distributed strictly inside (0.1, 10); the v_i are independent uniform
    [-1, 1]^m vectors normalized to unit 2-norm.
    """
    t = spec.t
    if t is None or t < 1:
        raise ValueError("monomial class needs a panel length t >= 1")
    n = spec.p * spec.s
    if n % t != 0:
        raise ValueError(f"panel length {t} must divide p*s = {n}")
    r_panels = n // t
    rng = make_rng(spec.seed)
    lam = np.linspace(0.1, 10.0, spec.m + 2)[1:-1]
    cols = np.empty((spec.m, n), order="F")
    j = 0
    for _ in range(r_panels):
        v = 2.0 * uniform_open(rng, spec.m) - 1.0
        v /= np.linalg.norm(v)
        for _ in range(t):
            cols[:, j] = v
            v = lam * v
            j += 1
    return BlockMatrix(cols, spec.s, spec.p)


def gen_piled(spec: MatrixClassSpec) -> BlockMatrix:
    """Cumulative-sum family X_k = X_{k-1} + Z_k.

    X_1 has condition number ``kappa_x1`` and unit spectral norm; every
    increment Z_k has condition number ``kappa_z`` and spectral norm
    1/kappa_z, so raising the knob makes consecutive blocks nearly equal
    and drives the overall conditioning up for any block width, including
    single columns.
    """
    if spec.kappa_z is None:
        raise ValueError("piled class needs a kappa_z knob")
    if spec.kappa_z < 1.0 or spec.kappa_x1 < 1.0:
        raise ValueError("kappa knobs must be >= 1")
    rng = make_rng(spec.seed)
    blocks = [svd_with_cond(spec.m, spec.s, spec.kappa_x1, rng=rng)]
    for _ in range(2, spec.p + 1):
        z = svd_with_cond(spec.m, spec.s, spec.kappa_z, rng=rng) / spec.kappa_z
        blocks.append(blocks[-1] + z)
    return BlockMatrix(np.hstack(blocks), spec.s, spec.p)


def calibrate_piled(
    m: int,
    p: int,
    s: int,
    kappa_target: float,
    seed: int,
    *,
    kappa_x1: float = 10.0,
    max_log_kz: float = 16.0,
    iterations: int = 40,
) -> tuple[MatrixClassSpec, float]:
    """Find the kappa_z knob whose generated matrix measures near a target.

    The knob-to-conditioning map is empirical, so this bisects on
    log10(kappa_z) against the measured cond_2 of the generated matrix.
    Returns the calibrated spec and the measured condition number; callers
    decide how far off target is acceptable.
    """
    if kappa_target < 1.0:
        raise ValueError("kappa must be >= 1")

    def measure(log_kz: float) -> tuple[MatrixClassSpec, float]:
        spec = MatrixClassSpec(
            "piled", m, p, s, seed, kappa_x1=kappa_x1, kappa_z=10.0**log_kz
        )
        x = gen_piled(spec)
        try:
            return spec, cond_2(x.data)
        except ValueError:
            return spec, np.inf

    target = np.log10(kappa_target)
    lo, hi = 0.0, max_log_kz
    spec_lo, kappa_lo = measure(lo)
    spec_hi, kappa_hi = measure(hi)
    if target <= np.log10(kappa_lo):
        return spec_lo, kappa_lo
    if target >= np.log10(kappa_hi):
        return spec_hi, kappa_hi
    best, best_kappa = spec_lo, kappa_lo
    for _ in range(iterations):
        mid = (lo + hi) / 2.0
        spec_mid, kappa_mid = measure(mid)
        if abs(np.log10(kappa_mid) - target) < abs(
            np.log10(best_kappa) - target
        ):
            best, best_kappa = spec_mid, kappa_mid
        if np.log10(kappa_mid) < target:
            lo = mid
        else:
            hi = mid
    return best, best_kappa


_GENERATORS = {
    "monomial": gen_monomial,
    "piled": gen_piled,
    "default": gen_default,
}


def generate(spec: MatrixClassSpec) -> BlockMatrix:
    """Dispatch to the family named by ``spec.matrix_class``."""
    return _GENERATORS[spec.matrix_class](spec)


# ---------------------------------------------------------------------------
# Interop formats
# ---------------------------------------------------------------------------

_BGSM_MAGIC = b"BGSM"


def save_bgsm(path, a) -> None:
    """Write a matrix in the BGSM binary format.

    Layout: magic bytes ``BGSM``, two little-endian u64 (rows, cols), then
    rows*cols little-endian float64 values in column-major order.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("BGSM stores 2-d matrices only")
    rows, cols = a.shape
    with open(path, "wb") as fh:
        fh.write(_BGSM_MAGIC)
        fh.write(struct.pack("<QQ", rows, cols))
        fh.write(np.asfortranarray(a, dtype="<f8").tobytes(order="F"))


def load_bgsm(path) -> np.ndarray:
    """Read a matrix written by :func:`save_bgsm`."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _BGSM_MAGIC:
            raise ValueError(f"{path}: not a BGSM file")
        rows, cols = struct.unpack("<QQ", fh.read(16))
        payload = fh.read(rows * cols * 8)
    if len(payload) != rows * cols * 8:
        raise ValueError(f"{path}: truncated BGSM payload")
    data = np.frombuffer(payload, dtype="<f8")
    return data.reshape((rows, cols), order="F").copy(order="F")


def save_matrix_market(path, a) -> None:
    """Write dense MatrixMarket array text (interop with other toolchains)."""
    scipy.io.mmwrite(str(path), np.asarray(a, dtype=np.float64))


def load_matrix_market(path) -> np.ndarray:
    """Read a dense MatrixMarket array file."""
    return np.asarray(scipy.io.mmread(str(path)), dtype=np.float64)

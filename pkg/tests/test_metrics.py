import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockgs.blockcore import BlockMatrix
from blockgs.metrics import (
    C_TOL,
    EPS,
    BoundSpec,
    StabilityReport,
    bound_envelope,
    bound_for,
    loo,
    rel_chol_res,
    rel_res,
)
from blockgs.muscles import CHOL_QR, HOUSE_QR, MGS
from blockgs.skeletons import SkeletonKind


def test_machine_constants():
    assert EPS == 2.0**-53
    assert EPS == np.finfo(np.float64).eps / 2.0
    assert C_TOL == 100.0


def test_loo_identity_is_zero():
    assert loo(np.eye(5)) == 0.0
    assert loo(np.eye(8)[:, :3]) == 0.0


def test_loo_duplicated_column_is_one():
    q = np.zeros((4, 2))
    q[0, 0] = 1.0
    q[0, 1] = 1.0
    assert loo(q) == pytest.approx(1.0)


def test_loo_nan_on_failed_run():
    q = np.eye(3)
    q[1, 1] = np.nan
    assert math.isnan(loo(q))


def test_rel_res_worked_example():
    # X = 2I factored as Q = I, R = I: half the mass is unexplained.
    x = 2.0 * np.eye(3)
    assert rel_res(x, np.eye(3), np.eye(3)) == pytest.approx(0.5)
    assert rel_res(x, np.eye(3), x) == 0.0


def test_rel_chol_res_worked_example():
    # X = I with R = 2I: ||I - 4I|| / ||I||^2 = 3.
    assert rel_chol_res(np.eye(4), 2.0 * np.eye(4)) == pytest.approx(3.0)
    assert rel_chol_res(np.eye(4), np.eye(4)) == 0.0


def test_metrics_nan_on_non_finite_factors():
    x = np.eye(3)
    bad = np.full((3, 3), np.nan)
    assert math.isnan(rel_res(x, bad, np.eye(3)))
    assert math.isnan(rel_res(x, np.eye(3), bad))
    assert math.isnan(rel_chol_res(x, bad))


def test_metrics_accept_block_matrices():
    x = BlockMatrix(np.eye(6)[:, :4].copy(), block_width=2)
    assert loo(x) == 0.0
    assert rel_res(x, x, np.eye(4)) == 0.0
    assert rel_chol_res(x, np.eye(4)) == 0.0


@given(
    seed=st.integers(min_value=0, max_value=2**32 - 1),
    c=st.sampled_from([0.25, 0.5, 2.0, 4.0, 8.0]),
)
@settings(max_examples=30, deadline=None)
def test_rel_res_scale_invariance(seed, c):
    # Powers of two scale exactly in binary floating point.
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((10, 4))
    q = rng.standard_normal((10, 4))
    r = np.triu(rng.standard_normal((4, 4)))
    assert rel_res(c * x, q, c * r) == rel_res(x, q, r)
    assert rel_chol_res(c * x, c * r) == rel_chol_res(x, r)


@given(seed=st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_loo_column_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    q = np.linalg.qr(rng.standard_normal((12, 5)))[0]
    perm = rng.permutation(5)
    assert loo(q[:, perm]) == pytest.approx(loo(q), abs=1e-15)


def test_stability_report_is_frozen():
    rep = StabilityReport(loo=0.0, rel_res=0.0, rel_chol_res=0.0, kappa=1.0)
    with pytest.raises(dataclasses.FrozenInstanceError):
        rep.loo = 1.0  # type: ignore[misc]


def test_bound_reorthogonalized_flat_envelope():
    spec = bound_for("bcgsi_plus_a", HOUSE_QR, CHOL_QR, CHOL_QR)
    assert spec.theta == 2
    assert spec.loo_exponent == 0.0
    assert spec.io_a_ok and spec.enforced
    applicable, bound = bound_envelope(spec, 1.0e7)
    assert applicable
    assert bound == pytest.approx(100.0 * EPS)


def test_bound_reorthogonalized_premise_needs_unconditional_first_block():
    spec = bound_for("bcgsi_plus", CHOL_QR, CHOL_QR, CHOL_QR)
    assert not spec.io_a_ok  # Gram-based first block violates the premise
    applicable, _ = bound_envelope(spec, 10.0)
    assert not applicable


def test_bound_three_sync():
    spec = bound_for("bcgsi_a_3s", HOUSE_QR, HOUSE_QR)
    assert spec.theta == 2
    assert spec.loo_exponent == 1
    applicable, bound = bound_envelope(spec, 1.0e4)
    assert applicable
    assert bound == pytest.approx(100.0 * EPS * 1.0e4)

    tied = bound_for("bcgsi_a_3s", CHOL_QR, CHOL_QR)
    assert tied.theta == 3
    assert tied.loo_exponent == 2
    assert tied.io_a_ok  # premise: first block no weaker than the loop

    mixed = bound_for("bcgsi_a_3s", CHOL_QR, HOUSE_QR)
    assert not mixed.io_a_ok  # first block weaker than the loop muscle


@pytest.mark.parametrize("kind", ["bcgsi_a_2s", "bcgsi_a_1s"])
def test_bound_low_sync_quadratic_envelope(kind):
    spec = bound_for(kind, HOUSE_QR)
    assert spec.theta == 3.0
    assert spec.loo_exponent == 2.0
    assert spec.io_a_ok and spec.enforced

    # kappa = 1e4: eps * kappa^3 ~ 1e-4, comfortably applicable.
    applicable, bound = bound_envelope(spec, 1.0e4)
    assert applicable
    assert bound == pytest.approx(100.0 * EPS * 1.0e8)

    # kappa = 1e6: eps * kappa^3 ~ 111 > 1/2, out of the guaranteed zone.
    applicable, _ = bound_envelope(spec, 1.0e6)
    assert not applicable

    assert bound_for(kind, CHOL_QR).io_a_ok  # alpha = 2 still admissible


def test_bound_bcgs_family_is_diagnostic_only():
    spec = bound_for("bcgs", HOUSE_QR, HOUSE_QR, p=10)
    assert not spec.enforced
    assert spec.loo_exponent == (10 - 2) + max(0 + 1, 0)
    spec = bound_for("bcgs_a", MGS, CHOL_QR, p=4)
    assert spec.loo_exponent == (4 - 2) + max(1 + 1, 2)


def test_bound_for_argument_validation():
    with pytest.raises(ValueError, match="need io1"):
        bound_for("bcgsi_plus_a", HOUSE_QR)
    with pytest.raises(ValueError, match="needs io1"):
        bound_for("bcgsi_a_3s", HOUSE_QR)
    with pytest.raises(ValueError, match="needs io1"):
        bound_for("bcgs", HOUSE_QR)
    with pytest.raises(ValueError, match="block count p"):
        bound_for("bcgs", HOUSE_QR, HOUSE_QR)
    with pytest.raises(ValueError):
        bound_for("not_a_skeleton", HOUSE_QR, HOUSE_QR)


def test_bound_envelope_edge_cases():
    spec = BoundSpec(SkeletonKind.BCGSI_A_2S, theta=3.0, loo_exponent=2.0)
    with pytest.raises(ValueError, match="kappa must be >= 1"):
        bound_envelope(spec, 0.5)
    applicable, _ = bound_envelope(spec, float("nan"))
    assert not applicable  # unmeasurable conditioning is never covered
    applicable, bound = bound_envelope(spec, 1.0)
    assert applicable
    assert bound == pytest.approx(100.0 * EPS)


@given(kappa=st.floats(min_value=1.0, max_value=1e15))
@settings(max_examples=50, deadline=None)
def test_bound_envelope_monotone_in_kappa(kappa):
    spec = BoundSpec(SkeletonKind.BCGSI_A_1S, theta=3.0, loo_exponent=2.0)
    applicable, bound = bound_envelope(spec, kappa)
    assert bound >= 100.0 * EPS
    assert applicable == (EPS * kappa**3 <= 0.5)

import math

import numpy as np
import pytest
from conftest import bsc
from hypothesis import given, settings
from hypothesis import strategies as st

from jscc_exponents.channel import (
    bhattacharyya,
    eex_ckm_primal,
    eex_prime_from_dual,
    eex_prime_primal,
    ex_prime_dual,
    ex_prime_dual_curve,
    ex_prime_dual_max,
    ex_prime_zero_rate,
    ex_single_dual,
    ex_single_dual_max,
    zero_rate_limit,
)
from jscc_exponents.prob import ValidationError

# closed forms for BSC(0.1), uniform inputs (30-digit evaluation, frozen)
D_B = 0.510825623765990683  # -log 0.6
EXP1 = 0.223143551314209756  # -log 0.8
EXP2 = 0.239148024098485137  # -2 log((1 + sqrt 0.6) / 2)
ZERO_RATE = 0.255412811882995342  # d_B / 2
UNIFORM = np.array([0.5, 0.5])


def channels(rows, cols):
    row = st.lists(st.floats(0.02, 1.0), min_size=cols, max_size=cols).map(lambda v: np.array(v) / np.sum(v))
    return st.lists(row, min_size=rows, max_size=rows).map(np.array)


def grid_ex_prime(Q, rho, d, m=2000):
    """Independent oracle for binary inputs: minimize over Q' on a fine grid."""
    B = np.exp(-d.d / rho)
    a = np.linspace(0, 1, m + 1)
    Qp = np.stack([a, 1 - a], axis=1)
    with np.errstate(divide="ignore"):
        vals = -rho * (np.log(Qp @ B.T) * Q).sum(axis=1)
    return vals.min()


def test_bhattacharyya_examples():
    d = bhattacharyya(bsc(0.1))
    assert d.d[0, 1] == pytest.approx(D_B, abs=1e-12)
    assert d.d[0, 0] == 0.0
    assert bhattacharyya(np.eye(2)).d[0, 1] == math.inf
    assert bhattacharyya([[0.3, 0.7], [0.3, 0.7]]).d[0, 1] == pytest.approx(0.0, abs=1e-15)


def test_bhattacharyya_rejects_bad_channel():
    with pytest.raises(ValidationError):
        bhattacharyya([[0.5, 0.4], [0.5, 0.5]])


@given(channels(3, 4))
@settings(max_examples=40, deadline=None)
def test_distance_matrix_invariants(W):
    d = bhattacharyya(W).d
    assert np.all(np.diag(d) == 0)
    np.testing.assert_allclose(d, d.T, atol=1e-14)
    assert np.all(d >= 0)


def test_ex_prime_dual_examples(bsc01, useless):
    d = bhattacharyya(bsc01)
    assert ex_prime_dual(UNIFORM, 1.0, d) == pytest.approx(EXP1, abs=1e-9)
    assert ex_prime_dual(UNIFORM, 2.0, d) == pytest.approx(EXP2, abs=1e-9)
    du = bhattacharyya(useless)
    for rho in (1.0, 3.0, 50.0):
        assert ex_prime_dual([0.2, 0.8], rho, du) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        ex_prime_dual(UNIFORM, 0.5, d)


@pytest.mark.parametrize("Q", [[0.5, 0.5], [0.7, 0.3], [0.95, 0.05]])
@pytest.mark.parametrize("rho", [1.0, 2.0, 7.5, 40.0])
def test_ex_prime_dual_against_grid(Q, rho):
    d = bhattacharyya([[0.8, 0.15, 0.05], [0.1, 0.2, 0.7]])
    Q = np.array(Q)
    oracle = grid_ex_prime(Q, rho, d)
    value = ex_prime_dual(Q, rho, d)
    # the grid minimum sits above the true minimum
    assert value <= oracle + 1e-12
    assert value == pytest.approx(oracle, abs=1e-5)


def test_ex_prime_dual_max_examples(bsc01, useless):
    v, Q = ex_prime_dual_max(1.0, bhattacharyya(bsc01))
    assert v == pytest.approx(EXP1, abs=1e-9)
    np.testing.assert_allclose(Q, UNIFORM, atol=1e-6)
    v, Q = ex_prime_dual_max(1.0, bhattacharyya(useless))
    assert v == 0.0
    np.testing.assert_allclose(Q, UNIFORM)
    v, Q = ex_prime_dual_max(2.0, bhattacharyya([[0.2, 0.8]]))
    assert v == 0.0 and Q.tolist() == [1.0]


def test_eex_prime_from_dual_examples(bsc01, useless):
    d = bhattacharyya(bsc01)
    opt = eex_prime_from_dual(UNIFORM, math.log(2), d)
    assert opt.value == pytest.approx(EXP1 - math.log(2), abs=1e-9)
    assert opt.arg == 1.0 and opt.at_lower
    opt = eex_prime_from_dual(UNIFORM, 0.0, d)
    assert opt.truncated
    assert opt.limit == pytest.approx(ZERO_RATE, abs=1e-12)
    assert zero_rate_limit(UNIFORM, d) == pytest.approx(ZERO_RATE, abs=1e-12)
    opt = eex_prime_from_dual(UNIFORM, 0.1, bhattacharyya(useless))
    assert opt.value == pytest.approx(-0.1, abs=1e-12) and opt.arg == 1.0


def test_eex_prime_primal_examples(bsc01, useless):
    d = bhattacharyya(bsc01)
    assert eex_prime_primal(UNIFORM, 0.0, d) == pytest.approx(ZERO_RATE, abs=1e-9)
    assert eex_prime_primal(UNIFORM, math.log(2), d) == pytest.approx(EXP1 - math.log(2), abs=1e-6)
    assert eex_prime_primal(UNIFORM, 0.0, bhattacharyya(useless)) == pytest.approx(0.0, abs=1e-12)


def test_eex_ckm_primal_examples(bsc01):
    d = bhattacharyya(bsc01)
    assert eex_ckm_primal(UNIFORM, 0.0, d) == pytest.approx(ZERO_RATE, abs=1e-9)
    for R in (0.0, 0.3, 1.0):
        assert eex_ckm_primal([1.0, 0.0], R, d) == pytest.approx(-R, abs=1e-12)
    v = eex_ckm_primal(UNIFORM, math.log(2), d)
    assert eex_prime_primal(UNIFORM, math.log(2), d) - 1e-9 <= v <= 1e-12


def test_ex_single_dual_examples(bsc01, useless):
    d = bhattacharyya(bsc01)
    v, tilt = ex_single_dual(UNIFORM, 1.0, d, return_tilt=True)
    assert v == pytest.approx(EXP1, abs=1e-9)
    np.testing.assert_allclose(tilt.a, 0.0, atol=1e-9)
    assert ex_single_dual(UNIFORM, 2.0, bhattacharyya(useless)) == pytest.approx(0.0, abs=1e-12)
    assert ex_single_dual([0.0, 1.0], 3.0, d) == pytest.approx(0.0, abs=1e-12)


def test_ex_single_dual_max_examples(bsc01, useless):
    d = bhattacharyya(bsc01)
    v, Q = ex_single_dual_max(1.0, d)
    assert v == pytest.approx(EXP1, abs=1e-9)
    np.testing.assert_allclose(Q, UNIFORM, atol=1e-6)
    assert v >= ex_prime_dual_max(1.0, d)[0] - 1e-12
    v, Q = ex_single_dual_max(1.0, bhattacharyya(useless))
    assert v == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(Q, UNIFORM)


def test_zero_rate_maximizer(bsc01):
    v, Q = ex_prime_zero_rate(bhattacharyya(bsc01))
    assert v == pytest.approx(ZERO_RATE, abs=1e-12)
    np.testing.assert_allclose(Q, UNIFORM, atol=1e-9)


def test_max_curve_dominates_members():
    d = bhattacharyya(bsc(0.1))
    rhos = np.geomspace(1, 100, 15)
    values, _ = ex_prime_dual_curve(rhos, d)
    for Q in ([0.5, 0.5], [0.9, 0.1], [0.3, 0.7]):
        member = np.array([ex_prime_dual(np.array(Q), r, d) for r in rhos])
        assert np.all(values >= member - 1e-9)


@given(channels(2, 3), st.floats(0.05, 0.95), st.floats(1.0, 30.0))
@settings(max_examples=30, deadline=None)
def test_single_letter_dominates_weak(W, q, rho):
    d = bhattacharyya(W)
    Q = np.array([q, 1 - q])
    assert ex_single_dual(Q, rho, d) >= ex_prime_dual(Q, rho, d) - 1e-6


@given(channels(2, 2), st.floats(0.1, 0.9))
@settings(max_examples=15, deadline=None)
def test_weak_exponent_primal_dual_and_ordering(W, q):
    d = bhattacharyya(W)
    Q = np.array([q, 1 - q])
    prev = math.inf
    for R in np.linspace(0.02, math.log(2), 6):
        primal = eex_prime_primal(Q, R, d)
        dual = eex_prime_from_dual(Q, R, d)
        if not (dual.truncated or dual.at_lower):
            assert primal == pytest.approx(dual.value, abs=1e-3)
        assert primal <= prev + 1e-9
        assert eex_ckm_primal(Q, R, d) >= primal - 1e-6
        prev = primal

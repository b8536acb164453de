import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jscc_exponents.prob import entropy, enumerate_types, kl_divergence
from jscc_exponents.source import (
    class_source_fn,
    gallager_source_fn,
    gallager_source_slope,
    source_reliability_dual,
    source_reliability_dual_opt,
    source_reliability_primal,
)

P = np.array([0.9, 0.1])
D_UNIFORM = 0.510825623765990683  # D(uniform || (0.9, 0.1)) = 0.5 log(0.25 / 0.09)


def test_gallager_source_fn_examples():
    assert gallager_source_fn(1.0, [0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-12)
    assert gallager_source_fn(3.7, [0.5, 0.5]) == pytest.approx(3.7 * math.log(2), abs=1e-12)
    assert gallager_source_fn(3.0, [1.0, 0.0]) == 0.0
    assert gallager_source_fn(1.0, P) == pytest.approx(math.log(1.6), abs=1e-12)


def test_gallager_source_slope_matches_finite_difference():
    h = 1e-6
    for rho in (0.0, 0.5, 2.0, 10.0):
        fd = (gallager_source_fn(rho + h, P) - gallager_source_fn(max(rho - h, 0), P)) / (rho + h - max(rho - h, 0))
        assert gallager_source_slope(rho, P) == pytest.approx(fd, abs=1e-6)


def test_reliability_primal_examples():
    assert source_reliability_primal(0.0, P) == 0.0
    assert source_reliability_primal(math.log(2), P) == pytest.approx(D_UNIFORM, abs=1e-12)
    assert source_reliability_primal(1.1 * math.log(2), P) == math.inf


def test_reliability_dual_examples():
    for R in (0.0, 0.3, math.log(2)):
        assert source_reliability_dual(R, [0.5, 0.5]) == pytest.approx(0.0, abs=1e-12)
    assert source_reliability_dual(math.log(2), P) == pytest.approx(D_UNIFORM, abs=1e-9)
    assert source_reliability_dual(0.1, [1.0, 0.0]) == math.inf


def test_dual_at_log_size_is_flagged_limit():
    opt = source_reliability_dual_opt(math.log(2), P)
    assert opt.truncated
    assert opt.limit == pytest.approx(D_UNIFORM, abs=1e-12)


def grid_reliability(R, p, m=20000):
    """Independent oracle: scan binary Q on a fine grid."""
    q = np.linspace(0, 1, m + 1)
    best = math.inf
    for a in q:
        Q = np.array([a, 1 - a])
        if entropy(Q) >= R:
            best = min(best, kl_divergence(Q, p))
    return best


@pytest.mark.parametrize("R", [0.05, 0.2, 0.4, 0.6])
def test_primal_against_grid_oracle(R):
    # the grid minimum is an upper bound within the grid's Lipschitz error
    oracle = grid_reliability(R, P)
    value = source_reliability_primal(R, P)
    assert value <= oracle + 1e-12
    assert value == pytest.approx(oracle, abs=1e-3)


def test_class_source_fn_examples():
    T = enumerate_types(4, 2)
    for rho in (0.0, 1.0, 2.5):
        assert class_source_fn(rho, T, P) == pytest.approx(4 * gallager_source_fn(rho, P), abs=1e-9)
    i = next(i for i, c in enumerate(T.counts.tolist()) if c == [4, 0])
    assert class_source_fn(1.0, T.subset([i]), P) == pytest.approx(4 * math.log(0.9), abs=1e-12)
    T1 = enumerate_types(1, 2)
    j = next(i for i, c in enumerate(T1.counts.tolist()) if c == [0, 1])
    assert class_source_fn(0.0, T1.subset([j]), P) == pytest.approx(math.log(0.1), abs=1e-12)


def test_class_source_fn_rejects_empty_class():
    with pytest.raises(ValueError):
        class_source_fn(1.0, enumerate_types(3, 2).subset([]), P)


@given(st.floats(0.02, 0.98), st.floats(0.0, 1.0))
@settings(max_examples=60, deadline=None)
def test_primal_dual_agree_binary(a, frac):
    p = np.array([a, 1 - a])
    R = frac * math.log(2)
    assert source_reliability_primal(R, p) == pytest.approx(source_reliability_dual(R, p), abs=1e-6)


@given(st.floats(0.05, 0.95))
@settings(max_examples=30, deadline=None)
def test_reliability_is_convex_nondecreasing(a):
    p = np.array([a, 1 - a])
    R = np.linspace(0, math.log(2) * 0.999, 25)
    e = np.array([source_reliability_primal(r, p) for r in R])
    assert np.all(np.diff(e) >= -1e-12)
    assert np.all(e[:-2] - 2 * e[1:-1] + e[2:] >= -1e-9)

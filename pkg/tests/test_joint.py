import math

import numpy as np
import pytest
from conftest import bsc

from jscc_exponents.channel import bhattacharyya, eex_prime_primal, ex_prime_dual
from jscc_exponents.joint import (
    CodewordFamily,
    csiszar_dual_exponent,
    dual_family_exponent,
    family_dual_curve,
    joint_exponent_EJ1,
    joint_exponent_EJ2,
    joint_exponent_primal,
    per_type_exponent_table,
    rho_grid,
    single_class_dual_exponent,
)
from jscc_exponents.partition import ClassParams, PartitionPlan
from jscc_exponents.prob import enumerate_types
from jscc_exponents.source import gallager_source_fn, source_reliability_primal

ZERO_RATE = 0.255412811882995342  # d_B / 2 for BSC(0.1)
QUARTER = 0.0498567561742234284  # -log 0.8 - 0.25 log 2
UNIFORM = np.array([0.5, 0.5])
DETERMINISTIC = np.array([1.0, 0.0])
W = bsc(0.1)
RHOS = rho_grid(points=120)


def test_family_validation():
    with pytest.raises(ValueError):
        CodewordFamily(())
    with pytest.raises(ValueError):
        CodewordFamily(([0.5, 0.5], [0.2, 0.3, 0.5]))


def test_family_curve_examples():
    d = bhattacharyya(W)
    rhos = np.geomspace(1, 50, 12)
    single = family_dual_curve(CodewordFamily((UNIFORM,)), d, rhos)
    np.testing.assert_allclose(single.values, [ex_prime_dual(UNIFORM, r, d) for r in rhos], atol=1e-12)
    double = family_dual_curve(CodewordFamily((UNIFORM, UNIFORM)), d, rhos)
    np.testing.assert_allclose(double.values, single.values, atol=1e-12)
    skew = np.array([0.9, 0.1])
    both = family_dual_curve(CodewordFamily((UNIFORM, skew)), d, rhos)
    other = np.array([ex_prime_dual(skew, r, d) for r in rhos])
    assert np.all(both.values >= np.maximum(single.values, other) - 1e-12)


def test_primal_joint_examples():
    fam = CodewordFamily((UNIFORM,))
    opt = joint_exponent_primal(1.0, DETERMINISTIC, W, fam)
    assert opt.value == pytest.approx(ZERO_RATE, abs=1e-6) and opt.arg == 0.0
    opt = joint_exponent_primal(1.0, UNIFORM, [[0.3, 0.7], [0.3, 0.7]], fam)
    assert opt.value == pytest.approx(-math.log(2), abs=1e-6)
    assert opt.arg == pytest.approx(math.log(2), abs=1e-6)
    opt = joint_exponent_primal(0.25, UNIFORM, W, fam)
    assert opt.value == pytest.approx(QUARTER, abs=1e-6)
    assert opt.arg == pytest.approx(0.25 * math.log(2), abs=1e-4)


def test_EJ2_examples():
    opt = joint_exponent_EJ2(1.0, DETERMINISTIC, W, rhos=RHOS)
    assert opt.value == pytest.approx(ZERO_RATE, abs=1e-9)
    assert opt.truncated
    assert joint_exponent_EJ2(0.25, UNIFORM, W, rhos=RHOS).value == pytest.approx(QUARTER, abs=1e-6)


def test_EJ2_useless_channel_matches_source_only_oracle():
    p = np.array([0.8, 0.2])
    t = 0.7
    useless = [[0.4, 0.6], [0.4, 0.6]]
    rates = np.linspace(0, t * math.log(2), 4001)
    oracle = min(t * source_reliability_primal(R / t, p) - R for R in rates)
    value = joint_exponent_EJ2(t, p, useless, rhos=RHOS).value
    assert value < 0
    assert value == pytest.approx(oracle, abs=1e-6)


def test_EJ1_deterministic_source():
    opt = joint_exponent_EJ1(1.0, DETERMINISTIC, W, q_grid=0.1, r_points=5)
    assert opt.value == pytest.approx(ZERO_RATE, abs=1e-6)
    np.testing.assert_allclose(opt.meta["Q"], UNIFORM)


def test_dual_family_singleton_matches_direct_sup():
    p = np.array([0.9, 0.1])
    t = 0.5
    d = bhattacharyya(W)
    lam = np.geomspace(1, 200, 4000)
    direct = max(ex_prime_dual(UNIFORM, r, d) - t * gallager_source_fn(r, p) for r in lam)
    value = dual_family_exponent(t, p, CodewordFamily((UNIFORM,)), W, rhos=RHOS).value
    assert value >= direct - 1e-12
    assert value == pytest.approx(direct, abs=1e-6)


def test_dual_family_deterministic_source_is_flagged():
    opt = dual_family_exponent(1.0, DETERMINISTIC, CodewordFamily((UNIFORM,)), W, rhos=RHOS)
    assert opt.truncated
    assert opt.limit == pytest.approx(ZERO_RATE, abs=1e-12)


def test_two_member_family_dominates_singletons():
    p = np.array([0.7, 0.3])
    skew = np.array([0.8, 0.2])
    both = dual_family_exponent(0.4, p, CodewordFamily((UNIFORM, skew)), W, rhos=RHOS).value
    for Q in (UNIFORM, skew):
        assert both >= dual_family_exponent(0.4, p, CodewordFamily((Q,)), W, rhos=RHOS).value - 1e-9


def test_csiszar_examples():
    p = np.array([0.9, 0.1])
    cs = csiszar_dual_exponent(0.5, p, W, rhos=RHOS)
    fam = dual_family_exponent(0.5, p, CodewordFamily((UNIFORM,)), W, rhos=RHOS)
    assert cs.value == pytest.approx(fam.value, abs=1e-6)
    det = csiszar_dual_exponent(1.0, DETERMINISTIC, W, rhos=RHOS)
    assert det.truncated and det.limit == pytest.approx(ZERO_RATE, abs=1e-9)
    quarter = csiszar_dual_exponent(0.25, UNIFORM, W, rhos=RHOS)
    assert quarter.value == pytest.approx(QUARTER, abs=1e-6)
    assert quarter.value == pytest.approx(joint_exponent_EJ2(0.25, UNIFORM, W, rhos=RHOS).value, abs=1e-3)


def test_single_class_examples():
    det = single_class_dual_exponent(1.0, DETERMINISTIC, W, rhos=RHOS)
    assert det.truncated
    assert det.value == pytest.approx(ZERO_RATE, abs=1e-4)
    assert single_class_dual_exponent(1.0, UNIFORM, W, rhos=RHOS).value < 0


def test_per_type_table_single_class():
    p = np.array([0.9, 0.1])
    types = enumerate_types(4, 2, 1.0)
    plan = PartitionPlan((ClassParams(UNIFORM, 1.0, 1.0),), np.zeros(len(types), int), types, 1.0)
    table = per_type_exponent_table(1.0, p, W, plan, RHOS)
    assert len(table.dual) == 5
    assert table.overall == table.dual.min()
    d = bhattacharyya(W)
    i = next(i for i, c in enumerate(types.counts.tolist()) if c == [4, 0])
    assert table.primal[i] == pytest.approx(eex_prime_primal(UNIFORM, 0.0, d), abs=1e-12)
    assert table.primal[i] == pytest.approx(ZERO_RATE, abs=1e-9)
    assert np.all(table.dual <= table.primal + 1e-3)
    rows = list(table.rows())
    assert rows[i]["class"] == 0 and rows[i]["rate"] == 0.0

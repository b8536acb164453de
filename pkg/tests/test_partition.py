import math

import numpy as np
import pytest
from conftest import bsc
from hypothesis import given, settings
from hypothesis import strategies as st

from jscc_exponents.channel import bhattacharyya
from jscc_exponents.config import load_preset
from jscc_exponents.joint import (
    CodewordFamily,
    csiszar_dual_exponent,
    dual_family_exponent,
    rho_grid,
)
from jscc_exponents.partition import (
    ClassParams,
    PartitionPlan,
    assign_classes,
    build_two_class_plan,
    check_feasibility,
    class_scores,
    threshold_assignment,
    two_class_threshold,
)
from jscc_exponents.prob import enumerate_types

UNIFORM = np.array([0.5, 0.5])
P = np.array([0.9, 0.1])
W = bsc(0.1)
D = bhattacharyya(W)
# 3 log(0.9^(1/3) + 0.1^(1/3)) - log 1.6, 30-digit evaluation
R0_EXAMPLE = 0.602281713435458034


def test_class_params_validation():
    with pytest.raises(ValueError):
        ClassParams(UNIFORM, 0.5, 1.0)
    with pytest.raises(ValueError):
        ClassParams(UNIFORM, 1.0, 0.9)


def test_plan_validation():
    types = enumerate_types(3, 2)
    c = ClassParams(UNIFORM, 1.0, 1.0)
    with pytest.raises(ValueError):
        PartitionPlan((c,), np.zeros(2, int), types, 1.0)
    with pytest.raises(ValueError):
        PartitionPlan((c,), np.ones(len(types), int), types, 1.0)


def test_single_and_identical_classes():
    types = enumerate_types(6, 2, 0.5)
    c = ClassParams(UNIFORM, 2.0, 3.0)
    assert np.all(assign_classes(types, [c], 0.5, P, D).assignment == 0)
    assert np.all(assign_classes(types, [c, c], 0.5, P, D).assignment == 0)
    with pytest.raises(ValueError):
        assign_classes(types, [], 0.5, P, D)


def test_threshold_example():
    c1 = ClassParams(UNIFORM, 1.0, 1.0)
    c2 = ClassParams(UNIFORM, 1.0, 2.0)
    R0 = two_class_threshold(c1, c2, 1.0, P, D)
    assert R0 == pytest.approx(R0_EXAMPLE, abs=1e-12)
    types = enumerate_types(12, 2, 1.0)
    plan = assign_classes(types, [c1, c2], 1.0, P, D)
    np.testing.assert_array_equal(plan.assignment, np.where(types.rates <= R0, 0, 1))
    assert 0 < (plan.assignment == 0).sum() < len(types)
    with pytest.raises(ValueError):
        two_class_threshold(c1, c1, 1.0, P, D)


def test_steeper_class_takes_high_rates():
    # equal E'_x and source terms (lam - rho differs, the rest offsets out): high R goes to the steeper class
    c1 = ClassParams(UNIFORM, 1.0, 3.0)
    c2 = ClassParams(UNIFORM, 2.0, 3.0)
    types = enumerate_types(10, 2, 1.0)
    a = assign_classes(types, [c1, c2], 1.0, P, D).assignment
    R0 = two_class_threshold(c1, c2, 1.0, P, D)
    np.testing.assert_array_equal(a, np.where(types.rates >= R0, 0, 1))
    assert np.all(np.diff(a[np.argsort(types.rates)]) <= 0)


def test_negative_threshold_empties_a_class():
    c1 = ClassParams(UNIFORM, 1.0, 1.0)
    c2 = ClassParams([0.99, 0.01], 1.0, 1.5)  # worse composition, steeper slope
    types = enumerate_types(8, 2, 0.05)
    R0 = two_class_threshold(c1, c2, 0.05, P, D)
    scores = class_scores([c1, c2], types.rates, 0.05, P, D)
    brute = np.argmax(scores, axis=0)
    plan = assign_classes(types, [c1, c2], 0.05, P, D)
    np.testing.assert_array_equal(plan.assignment, brute)
    np.testing.assert_array_equal(threshold_assignment(types.rates, R0, c1, c2), brute)


@given(
    st.floats(0.05, 0.95), st.floats(0.05, 0.95),
    st.floats(1, 6), st.floats(1, 6), st.floats(1, 6), st.floats(1, 6),
    st.floats(0.05, 2.0), st.integers(1, 16), st.floats(0.05, 0.95),
)
@settings(max_examples=60, deadline=None)
def test_assignment_is_threshold_rule(q1, q2, r1, r2, l1, l2, t, k, a):
    c1 = ClassParams([q1, 1 - q1], r1, l1)
    c2 = ClassParams([q2, 1 - q2], r2, l2)
    if c1.slope == c2.slope:
        return
    p = np.array([a, 1 - a])
    types = enumerate_types(k, 2, t)
    plan = assign_classes(types, [c1, c2], t, p, D)
    R0 = two_class_threshold(c1, c2, t, p, D)
    expected = threshold_assignment(types.rates, R0, c1, c2)
    close = np.abs(types.rates - R0) < 1e-9 * max(1.0, abs(R0))  # exact ties are rounding-sensitive
    np.testing.assert_array_equal(plan.assignment[~close], expected[~close])


def test_symmetric_channel_gives_one_effective_class():
    rhos = rho_grid(points=120)
    plan, value = build_two_class_plan(0.5, P, W, 8, rhos=rhos)
    assert plan.meta["single_class"]
    assert plan.classes[0].same_as(plan.classes[1])
    single = dual_family_exponent(0.5, P, CodewordFamily((UNIFORM,)), W, rhos=rhos).value
    assert value == pytest.approx(single, abs=1e-6)


def test_deterministic_source_gives_one_effective_class():
    plan, _ = build_two_class_plan(1.0, [1.0, 0.0], W, 4, rhos=rho_grid(points=60))
    assert plan.meta["single_class"]
    assert np.all(plan.assignment == 0)


def test_switching_channel_gives_two_classes():
    cfg = load_preset("switching3")
    rhos = cfg.grids.rhos()
    plan, value = build_two_class_plan(cfg.t, cfg.source, cfg.channel, 4, rhos=rhos, primal=False)
    assert not plan.meta["single_class"]
    assert not np.allclose(plan.classes[0].Q, plan.classes[1].Q)
    cs = csiszar_dual_exponent(cfg.t, cfg.source, cfg.channel, rhos=rhos)
    # k = 4 misses the critical type rate, so the finite-k minimum can only sit above the dual
    assert value >= cs.value - 1e-9
    for c in plan.classes:
        single = dual_family_exponent(cfg.t, cfg.source, CodewordFamily((c.Q,)), cfg.channel, rhos=rhos).value
        assert value >= single - 1e-6


def _plan(k, assignment, classes, t=1.0):
    types = enumerate_types(k, 2, t)
    return PartitionPlan(tuple(classes), np.asarray(assignment), types, t)


def test_feasibility_examples():
    u = ClassParams(UNIFORM, 1.0, 1.0)
    all_in_one = _plan(4, np.zeros(5, int), [u])
    rep = check_feasibility(all_in_one, 4)
    assert not rep.feasible
    assert rep.margins[0] == pytest.approx(math.log(6) - math.log(16), abs=1e-12)
    # class sizes 1, 4, 6, 4, 1 regrouped as {6}, {4, 1, 1}, {4}: every class fits in 6 codewords
    types = enumerate_types(4, 2)
    group = {(2, 2): 0, (3, 1): 1, (4, 0): 1, (0, 4): 1, (1, 3): 2}
    split = [group[tuple(c)] for c in types.counts.tolist()]
    rep = check_feasibility(_plan(4, split, [u, u, u]), 4)
    assert rep.feasible
    np.testing.assert_allclose(rep.margins, [0.0, 0.0, math.log(6) - math.log(4)], atol=1e-12)


def test_feasibility_small_classes():
    u = ClassParams([0.3, 0.7], 1.0, 1.0)
    mass = ClassParams([1.0, 0.0], 1.0, 1.0)
    types = enumerate_types(3, 2)
    single = [0 if c == [3, 0] else 1 for c in types.counts.tolist()]
    rep = check_feasibility(_plan(3, single, [u, u]), 3)
    assert rep.passes[0]
    rep = check_feasibility(_plan(3, np.zeros(4, int), [mass]), 6)
    assert not rep.feasible


def test_feasibility_margins_grow_with_n():
    u = ClassParams(UNIFORM, 1.0, 1.0)
    plan = _plan(6, np.zeros(7, int), [u], t=0.5)
    margins = [check_feasibility(plan, n).margins[0] for n in (12, 16, 20, 24)]
    assert np.all(np.diff(margins) > 0)

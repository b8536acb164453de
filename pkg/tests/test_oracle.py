import math

import numpy as np
import pytest
from conftest import bsc

from jscc_exponents.channel import bhattacharyya, eex_ckm_primal, eex_prime_primal
from jscc_exponents.config import load_preset
from jscc_exponents.oracle import (
    brute_force_ckm_exponent,
    brute_force_weak_exponent,
    duality_report,
    lipschitz_tolerance,
)

ZERO_RATE = 0.255412811882995342
UNIFORM = np.array([0.5, 0.5])
D = bhattacharyya(bsc(0.1))


def test_input_checks():
    with pytest.raises(ValueError):
        brute_force_weak_exponent(np.full(4, 0.25), 0.1, bhattacharyya(np.eye(4)))
    with pytest.raises(ValueError):
        brute_force_weak_exponent(UNIFORM, -0.1, D)
    with pytest.raises(ValueError):
        brute_force_ckm_exponent(UNIFORM, 0.1, D, resolution=0.001)


def test_weak_oracle_examples():
    assert brute_force_weak_exponent(UNIFORM, 0.0, D, 0.02) == pytest.approx(ZERO_RATE, abs=0.01)
    useless = bhattacharyya([[0.3, 0.7], [0.3, 0.7]])
    for R in (0.0, 0.2, 0.6):
        assert brute_force_weak_exponent([0.4, 0.6], R, useless, 0.02) == pytest.approx(-R, abs=0.02)


def test_ckm_oracle_examples():
    assert brute_force_ckm_exponent(UNIFORM, 0.0, D) == pytest.approx(ZERO_RATE, abs=1e-4)
    v = brute_force_ckm_exponent(UNIFORM, math.log(2), D)
    assert v == pytest.approx(eex_ckm_primal(UNIFORM, math.log(2), D), abs=1e-3)


@pytest.mark.parametrize("Q", [[0.5, 0.5], [0.7, 0.3]])
def test_oracles_certify_solvers(Q):
    Q = np.array(Q)
    res = 0.02
    for R in np.linspace(0, math.log(2), 10):
        weak = brute_force_weak_exponent(Q, R, D, res)
        solver = eex_prime_primal(Q, R, D)
        assert abs(weak - solver) <= 5 * res
        # every grid point is feasible, so the oracle bounds the true minimum from above
        assert weak >= solver - 1e-9
        assert brute_force_ckm_exponent(Q, R, D) == pytest.approx(eex_ckm_primal(Q, R, D), abs=1e-3)


def test_ternary_oracles_run():
    d = bhattacharyya([[0.8, 0.1, 0.1], [0.1, 0.8, 0.1], [0.1, 0.1, 0.8]])
    Q = np.full(3, 1 / 3)
    for R in (0.0, 0.5):
        assert brute_force_weak_exponent(Q, R, d, 0.05) >= eex_prime_primal(Q, R, d) - 1e-9
        assert brute_force_ckm_exponent(Q, R, d, 0.05) >= eex_ckm_primal(Q, R, d) - 1e-9


def test_lipschitz_tolerance_positive():
    assert lipschitz_tolerance(0.02, D) > 0.02 * D.d[0, 1]


def test_duality_report_bsc():
    rep = duality_report(0.5, [0.9, 0.1], bsc(0.1), channel_points=10)
    assert rep.max_gap("source") <= 1e-6
    assert max(rep.max_gap(q) for q in {r.quantity for r in rep.rows if r.quantity.startswith("channel")}) <= 1e-3
    assert not rep.unexplained()


@pytest.mark.parametrize("name", ["bsc01_tuned", "uniform_2x3", "bsc005"])
def test_duality_report_presets(name):
    cfg = load_preset(name)
    rep = duality_report(cfg.t, cfg.source, cfg.channel, rhos=cfg.grids.rhos(), r_points=20, channel_points=8)
    joint = [r for r in rep.rows if r.quantity == "joint"]
    assert len(joint) == 1
    assert joint[0].gap <= 1e-3 or joint[0].flagged
    assert not rep.unexplained()

"""Build the two-class partition for a preset and show which types go where.

    python demos/two_class_plan.py [preset] [k]
"""

import sys

import numpy as np

from jscc_exponents import (
    build_two_class_plan,
    build_type_plan,
    csiszar_dual_exponent,
    load_preset,
)


def main(name="uniform_2x3", k=8):
    cfg = load_preset(name)
    rhos = cfg.grids.rhos()
    dual = csiszar_dual_exponent(cfg.t, cfg.source, cfg.channel, rhos=rhos)
    plan, two = build_two_class_plan(cfg.t, cfg.source, cfg.channel, k, rhos=rhos, primal=False)
    _, full = build_type_plan(cfg.t, cfg.source, cfg.channel, k, rhos=rhos, primal=False)
    np.set_printoptions(precision=4, suppress=True)
    print(f"{name}, k={k}: lambda0 = {plan.meta['lambda0']:.4f}, chord ends = {plan.meta['support']}")
    for j, c in enumerate(plan.classes, 1):
        print(f"  class {j}: Q = {c.Q}, rho = {c.rho:.4f}, lambda = {c.lam:.4f}")
    if "threshold" in plan.meta:
        print(f"  threshold rate R0 = {plan.meta['threshold']:.6f}")
    for counts, rate, cls in zip(plan.types.counts, plan.types.rates, plan.assignment):
        print(f"    type {counts}  rate {rate:.4f}  -> class {cls + 1}")
    print(f"two-class {two:.8f}   per-type {full:.8f}   hull dual {dual.value:.8f}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "uniform_2x3", int(sys.argv[2]) if len(sys.argv) > 2 else 8)

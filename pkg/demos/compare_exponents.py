"""Print the joint exponents of the binary-input presets side by side.

    python demos/compare_exponents.py [--ej1]

The primal EJ1 search takes a minute or two per preset, so it only runs
with ``--ej1``.
"""

import sys

from jscc_exponents import (
    csiszar_dual_exponent,
    joint_exponent_EJ1,
    joint_exponent_EJ2,
    load_preset,
    single_class_dual_exponent,
)

PRESETS = ["bsc01", "bsc02", "bsc01_skewed", "bsc01_tuned", "uniform_2x3"]


def main(with_ej1=False):
    print(f"{'preset':<14}{'t':>9}{'single':>11}{'EJ1':>11}{'EJ2':>11}{'hull dual':>11}")
    for name in PRESETS:
        cfg = load_preset(name)
        rhos = cfg.grids.rhos()
        single = single_class_dual_exponent(cfg.t, cfg.source, cfg.channel, rhos=rhos).value
        ej1 = joint_exponent_EJ1(cfg.t, cfg.source, cfg.channel).value if with_ej1 else float("nan")
        ej2 = joint_exponent_EJ2(cfg.t, cfg.source, cfg.channel, rhos=rhos).value
        hull = csiszar_dual_exponent(cfg.t, cfg.source, cfg.channel, rhos=rhos).value
        print(f"{name:<14}{cfg.t:>9.4g}{single:>11.5f}{ej1:>11.5f}{ej2:>11.5f}{hull:>11.5f}")


if __name__ == "__main__":
    main("--ej1" in sys.argv[1:])

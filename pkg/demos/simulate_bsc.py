"""Error probability of sampled two-class codebooks on BSC(0.05), source (0.8, 0.2).

    python demos/simulate_bsc.py

Exact enumeration is used up to n = 16 and Monte Carlo beyond.
"""

from jscc_exponents import build_two_class_plan, expurgate_best_of, load_preset
from jscc_exponents.sim import MAX_EXACT_OUTPUTS


def main():
    cfg = load_preset("bsc005")
    print(f"{'n':>4}{'k':>4}{'p_e':>12}{'-(1/n) log p_e':>17}{'exponent':>10}")
    for n in cfg.sim.n_list:
        k = round(n * cfg.t)
        plan, E = build_two_class_plan(cfg.t, cfg.source, cfg.channel, k, rhos=cfg.grids.rhos(), primal=False)
        exact = cfg.channel.rows.shape[1] ** n <= MAX_EXACT_OUTPUTS
        _, res = expurgate_best_of(plan, n, cfg.sim.best_of, 20_000, cfg.sim.seed, cfg.channel.rows,
                                   cfg.source.probs, exact=exact, bound_exponent=E)
        print(f"{n:>4}{k:>4}{res.p_e:>12.3e}{res.empirical_exponent:>17.4f}{E:>10.4f}")


if __name__ == "__main__":
    main()

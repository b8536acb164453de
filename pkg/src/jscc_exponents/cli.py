"""Command-line front end.

Every command reads one scenario (a JSON config file or a shipped preset),
writes ``<command>.csv`` plus a ``<command>.manifest`` of key=value lines
into ``--out``, and exits with 0 on success.  Values are printed with nine
significant digits; a ``flag`` column holds ``*`` for boundary-attained or
truncated values.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from importlib import metadata
from pathlib import Path

import numpy as np

from .channel import (
    bhattacharyya,
    eex_ckm_primal,
    eex_prime_from_dual,
    eex_prime_primal,
    ex_prime_dual,
    ex_prime_dual_curve,
    ex_single_dual_curve,
    ex_single_table,
)
from .config import ScenarioConfig, load_preset, validate_config
from .hull import biconjugate_eval, upper_concave_hull
from .joint import (
    _channel_sups,
    _RateMaximizers,
    channel_max_curve,
    csiszar_dual_exponent,
    joint_exponent_EJ1,
    joint_exponent_EJ2,
    rate_grid,
    single_class_dual_exponent,
    source_term,
)
from .oracle import (
    brute_force_ckm_exponent,
    brute_force_weak_exponent,
    duality_report,
    lipschitz_tolerance,
)
from .partition import build_two_class_plan, check_feasibility
from .prob import ValidationError
from .sim import MAX_EXACT_OUTPUTS, MAX_MESSAGES, expurgate_best_of, union_bound
from .source import (
    gallager_source_fn,
    gallager_source_slope,
    source_reliability_dual_opt,
    source_reliability_primal,
)

EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_CAP = 4
ORACLE_POINTS = 10


class CommandError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def fmt(x) -> str:
    """Nine significant digits; infinities become ``inf`` / ``-inf``."""
    if isinstance(x, (bool, np.bool_)):
        return "*" if x else ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        raise ValueError("refusing to write NaN")
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0:
        return "0"
    return f"{x:.9g}"


def _vec(v) -> str:
    return " ".join(fmt(float(a)) for a in np.ravel(v))


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([c if isinstance(c, str) else fmt(c) for c in row])


def write_manifest(path: Path, entries: dict) -> None:
    with open(path, "w", newline="") as fh:
        for key, value in entries.items():
            if isinstance(value, str):
                text = value
            elif np.ndim(value) > 0:
                text = _vec(value)
            else:
                text = fmt(value)
            fh.write(f"{key}={text}\n")


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


# --------------------------------------------------------------------------
# commands; each returns (rows by file name, manifest entries)


def _rhos(cfg: ScenarioConfig) -> np.ndarray:
    return cfg.grids.rhos()


def cmd_source_exp(cfg, args):
    p = cfg.source.probs
    support = int(np.count_nonzero(p))
    rows = []
    flagged = 0
    for R in np.linspace(0.0, math.log(support), cfg.grids.r_points):
        dual = source_reliability_dual_opt(R, p, rho_max=cfg.grids.rho_max)
        flagged += dual.truncated
        rows.append([R, source_reliability_primal(R, p), dual.value, dual.arg, dual.truncated])
    lam = np.concatenate(([0.0], _rhos(cfg)))
    curve = [[r, gallager_source_fn(r, p), gallager_source_slope(r, p)] for r in lam]
    files = {
        "source-exp.csv": (["R", "e_primal", "e_dual", "rho_opt", "flag"], rows),
        "source-exp_Es.csv": (["rho", "E_s", "dE_s"], curve),
    }
    return files, {"flagged_rows": flagged}


def _composition(cfg, args) -> np.ndarray:
    X = cfg.channel.rows.shape[0]
    if args.composition is None:
        return np.full(X, 1.0 / X)
    Q = np.array([float(a) for a in args.composition.split(",")])
    if Q.size != X or np.any(Q < 0) or abs(Q.sum() - 1) > 1e-12:
        raise CommandError(f"--composition needs {X} probabilities summing to 1", EXIT_CONFIG)
    return Q


def cmd_channel_exp(cfg, args):
    d = bhattacharyya(cfg.channel.rows)
    X = d.size
    Q = _composition(cfg, args)
    rhos = _rhos(cfg)
    dist = [[a, b, d.d[a, b]] for a in range(X) for b in range(X)]
    exq = ex_single_table(Q[None], rhos, d)[:, 0]
    epq = np.array([ex_prime_dual(Q, r, d) for r in rhos])
    epmax, _ = ex_prime_dual_curve(rhos, d)
    exmax, _ = ex_single_dual_curve(rhos, d, cfg.grids.q_resolution)
    curve = [[r, a, b, c, e] for r, a, b, c, e in zip(rhos, epq, exq, epmax, exmax)]
    grid = np.linspace(0.0, math.log(X), cfg.grids.r_points)
    rates = []
    flagged = 0
    for R, (value, rho_opt, truncated) in zip(grid, _channel_sups(Q, grid, d, rhos)):
        flag = truncated or rho_opt <= rhos[0] * (1 + 1e-9)
        if truncated:
            # the supremum escapes to rho -> infinity; report its limit
            dual = eex_prime_from_dual(Q, R, d, rho_max=cfg.grids.rho_max)
            value = dual.limit if dual.limit is not None else dual.value
        flagged += flag
        rates.append([R, eex_prime_primal(Q, R, d), value, eex_ckm_primal(Q, R, d), flag])
    files = {
        "channel-exp.csv": (["R", "Eex_prime_primal", "Eex_prime_dual", "Eex_ckm", "flag"], rates),
        "channel-exp_rho.csv": (["rho", "Ex_prime_Q", "Ex_Q", "Ex_prime_max", "Ex_max"], curve),
        "channel-exp_distance.csv": (["x", "x_bar", "d_B"], dist),
    }
    return files, {"composition": Q, "flagged_rows": flagged}


def cmd_joint(cfg, args):
    t, p, W = cfg.t, cfg.source.probs, cfg.channel.rows
    d = bhattacharyya(W)
    rhos = _rhos(cfg)
    curve = channel_max_curve(d, rhos)
    best = _RateMaximizers(curve, d)
    support = int(np.count_nonzero(p))
    rows = []
    flagged = 0
    for R in rate_grid(t * math.log(support), cfg.grids.r_points):
        s = source_term(R, t, p)
        # max_Q E'_ex(Q, R) = sup_rho max_Q E'_x(Q, rho) - rho R, with the peaks refined
        o = curve.values - curve.grid * R
        ch = float(o.max())
        for Q in best(R):
            opt = eex_prime_from_dual(Q, R, d, rho_max=cfg.grids.rho_max)
            ch = max(ch, opt.limit if opt.limit is not None else opt.value)
        flag = bool(np.argmax(o) == o.size - 1)
        flagged += flag
        rows.append([R, s, ch, s + ch, flag])
    cs = csiszar_dual_exponent(t, p, W, curve=curve)
    ej2 = joint_exponent_EJ2(t, p, W, curve=curve)
    single = single_class_dual_exponent(t, p, W, q_grid=cfg.grids.q_resolution, rhos=rhos)
    summary = [
        ["EJ2_primal", ej2.value, ej2.arg, ej2.flagged],
        ["hull_dual", cs.value, cs.arg, cs.flagged],
        ["single_class_dual", single.value, single.arg, single.flagged],
    ]
    if not args.skip_ej1:
        ej1 = joint_exponent_EJ1(t, p, W, q_grid=cfg.grids.q_resolution)
        summary.insert(0, ["EJ1_primal", ej1.value, ej1.arg, ej1.flagged])
    files = {
        "joint.csv": (["R", "source_term", "channel_term", "sum", "flag"], rows),
        "joint_summary.csv": (["quantity", "value", "arg", "flag"], summary),
    }
    return files, {"flagged_rows": flagged, "EJ1_skipped": str(bool(args.skip_ej1)).lower()}


def cmd_hull(cfg, args):
    d = bhattacharyya(cfg.channel.rows)
    curve = channel_max_curve(d, _rhos(cfg))
    hull = upper_concave_hull(curve)
    on_vertex = np.zeros(len(curve), dtype=bool)
    on_vertex[hull.meta["vertices"]] = True
    rows = [[lam, g, h, biconjugate_eval(curve, lam), not v]
            for lam, g, h, v in zip(curve.grid, curve.values, hull.values, on_vertex)]
    files = {"hull.csv": (["lambda", "Ex_prime_max", "hull", "biconjugate", "chord"], rows)}
    return files, {"hull_vertices": int(on_vertex.sum())}


def cmd_partition(cfg, args):
    k = args.k or cfg.sim.k
    t, p, W = cfg.t, cfg.source.probs, cfg.channel.rows
    plan, overall = build_two_class_plan(t, p, W, k, rhos=_rhos(cfg))
    table = plan.meta["table"]
    V = p.size
    rows = []
    for i, r in enumerate(table.rows()):
        counts = plan.types.counts[i]
        rows.append([*counts, r["rate"], r["class"], *table.Q[i], r["primal"], r["dual"], r["rho"], r["lambda"],
                     bool(table.rho_truncated[i])])
    X = W.shape[0]
    header = [f"n_{v}" for v in range(V)] + ["rate", "class"] + [f"Q_{x}" for x in range(X)]
    header += ["primal", "dual", "rho", "lambda", "flag"]
    dual = plan.meta["dual"]
    man = {
        "k": k,
        "overall_exponent": overall,
        "hull_dual_exponent": dual.value,
        "lambda0": plan.meta["lambda0"],
        "chord_ends": np.array(plan.meta["support"]),
        "single_class": str(plan.meta["single_class"]).lower(),
        "threshold_R0": plan.meta.get("threshold", math.nan) if not plan.meta["single_class"] else "none",
    }
    for c, cl in enumerate(plan.classes):
        man[f"class{c}_Q"] = cl.Q
        man[f"class{c}_rho"] = cl.rho
        man[f"class{c}_lambda"] = cl.lam
    n = plan.n
    files = {"partition.csv": (header, rows)}
    if n is None:
        man["feasibility"] = "n=k/t is not an integer"
        return files, man
    rep = check_feasibility(plan, n)
    man["n"] = n
    man["feasibility_margins"] = rep.margins
    man["feasible"] = str(rep.feasible).lower()
    if not rep.feasible and args.strict:
        raise CommandError(f"partition is infeasible at n={n}", EXIT_INFEASIBLE)
    return files, man


def cmd_certify(cfg, args):
    t, p, W = cfg.t, cfg.source.probs, cfg.channel.rows
    rep = duality_report(t, p, W, rhos=_rhos(cfg))
    rows = [[r.quantity, r.x, r.primal, r.dual, r.gap, r.flagged] for r in rep.rows]
    d = bhattacharyya(W)
    X = d.size
    oracle_rows = []
    if X <= 3:
        res = max(cfg.grids.q_resolution, 0.01)
        Q = np.full(X, 1.0 / X)
        for R in np.linspace(0.0, math.log(X), ORACLE_POINTS):
            oracle_rows.append(["weak", R, eex_prime_primal(Q, R, d), brute_force_weak_exponent(Q, R, d, res)])
            oracle_rows.append(["ckm", R, eex_ckm_primal(Q, R, d), brute_force_ckm_exponent(Q, R, d, res)])
        oracle_rows = [[*r, 0.0 if r[3] == r[2] else r[3] - r[2]] for r in oracle_rows]  # inf == inf
    files = {
        "certify.csv": (["quantity", "x", "primal", "dual", "gap", "flag"], rows),
        "certify_oracle.csv": (["exponent", "R", "solver", "oracle", "oracle_minus_solver"], oracle_rows),
    }
    man = {
        "duality_tolerance": rep.tolerance,
        "max_gap_unflagged": rep.max_gap(),
        "unexplained_gaps": len(rep.unexplained()),
        "oracle_resolution": max(cfg.grids.q_resolution, 0.01) if X <= 3 else "skipped",
    }
    if X <= 3:
        man["oracle_lipschitz_tolerance"] = lipschitz_tolerance(man["oracle_resolution"], d)
    return files, man


def cmd_simulate(cfg, args):
    t, p, W = cfg.t, cfg.source.probs, cfg.channel.rows
    n_list = [int(a) for a in args.n.split(",")] if args.n else list(cfg.sim.n_list)
    best_of = args.best_of or cfg.sim.best_of
    trials = args.trials or cfg.sim.trials
    seed = cfg.sim.seed if args.seed is None else args.seed
    rows = []
    for n in n_list:
        k = n * t
        if abs(k - round(k)) > 1e-9 or round(k) < 1:
            raise CommandError(f"n={n} gives a non-integer source length k=n*t={k}", EXIT_CONFIG)
        k = int(round(k))
        if p.size**k > MAX_MESSAGES:
            raise CommandError(f"{p.size}^{k} messages exceed the cap {MAX_MESSAGES}", EXIT_CAP)
        if args.exact and W.shape[1] ** n > MAX_EXACT_OUTPUTS:
            raise CommandError(f"{W.shape[1]}^{n} outputs exceed the enumeration cap", EXIT_CAP)
        plan, E = build_two_class_plan(t, p, W, k, rhos=_rhos(cfg), primal=False)
        if not check_feasibility(plan, n).feasible:
            raise CommandError(f"partition is infeasible at n={n}", EXIT_INFEASIBLE)
        _, res = expurgate_best_of(plan, n, best_of, trials, seed, W, p, exact=args.exact, bound_exponent=E)
        lo, hi = res.exponent_interval()
        ub = union_bound(E, n, k, p.size, len(plan.types))
        rows.append([n, k, res.p_e, res.half_width, res.empirical_exponent, lo, hi, E, ub])
    header = ["n", "k", "p_e", "ci", "empirical_exponent", "exponent_lo", "exponent_hi", "bound_exponent",
              "union_bound"]
    man = {"n_list": ",".join(map(str, n_list)), "best_of": best_of, "trials": trials, "seed": seed,
           "mode": "exact" if args.exact else "monte_carlo", "confidence": "wilson 95%"}
    return {"simulate.csv": (header, rows)}, man


COMMANDS = {
    "source-exp": (cmd_source_exp, "source reliability function e(R) and E_s curves"),
    "channel-exp": (cmd_channel_exp, "Bhattacharyya distances and expurgated channel exponents"),
    "joint": (cmd_joint, "joint exponents in primal and dual form"),
    "hull": (cmd_hull, "max_Q E'_x curve, its concave hull and numerical biconjugate"),
    "partition": (cmd_partition, "two-class partition, threshold and feasibility"),
    "certify": (cmd_certify, "primal/dual and brute-force certification report"),
    "simulate": (cmd_simulate, "best-of-M Monte Carlo campaign"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="jscc-exponents", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        src = sp.add_mutually_exclusive_group(required=True)
        src.add_argument("config", nargs="?", help="JSON scenario file")
        src.add_argument("--preset", help="name of a shipped preset")
        sp.add_argument("--out", default=".", help="output directory (default: current)")
        sp.add_argument("--grid-rho-max", type=float, help="largest rho / lambda on the grid")
        sp.add_argument("--grid-points", type=int, help="number of rho / lambda samples")
        sp.add_argument("--r-points", type=int, help="number of rate samples")
        sp.add_argument("--q-res", type=float, help="simplex grid resolution for searches over Q")
        sp.add_argument("--seed", type=int, help="master seed (simulate)")
        sp.add_argument("--exact", action="store_true", help="force exact enumeration (simulate)")
        if name == "channel-exp":
            sp.add_argument("--composition", help="input composition, comma separated (default uniform)")
        if name == "joint":
            sp.add_argument("--skip-ej1", action="store_true", help="skip the grid search for E_J1")
        if name == "partition":
            sp.add_argument("--k", type=int, help="source block length (default: sim.k of the config)")
            sp.add_argument("--strict", action="store_true", help="fail when the plan is infeasible at n=k/t")
        if name == "simulate":
            sp.add_argument("--n", help="comma-separated blocklengths (default: sim.n_list)")
            sp.add_argument("--best-of", type=int, help="codebooks sampled per blocklength")
            sp.add_argument("--trials", type=int, help="Monte Carlo trials per codebook")
    return ap


def _load(args) -> tuple[ScenarioConfig, str]:
    if args.preset:
        cfg, origin = load_preset(args.preset), f"preset:{args.preset}"
    else:
        cfg, origin = validate_config(args.config), str(args.config)
    cfg = cfg.with_grids(rho_max=args.grid_rho_max, rho_points=args.grid_points, r_points=args.r_points,
                         q_resolution=args.q_res)
    g = cfg.grids
    if g.rho_max <= 1 or g.rho_points < 2 or g.r_points < 2 or not 0 < g.q_resolution <= 1:
        raise ValidationError("grid flags need rho_max > 1, at least two points and 0 < q_res <= 1")
    return cfg, origin


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg, origin = _load(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    fn = COMMANDS[args.command][0]
    try:
        files, extra = fn(cfg, args)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except OverflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for fname, (header, rows) in files.items():
        write_csv(out / fname, header, rows)
    g = cfg.grids
    manifest = {
        "command": args.command,
        "config": origin,
        "version": _version(),
        "source_probs": cfg.source.probs,
        "t": cfg.t,
        "channel_rows": ";".join(_vec(r) for r in cfg.channel.rows),
        "rho_max": g.rho_max,
        "rho_points": g.rho_points,
        "r_points": g.r_points,
        "q_resolution": g.q_resolution,
        "files": ",".join(files),
        **extra,
    }
    write_manifest(out / f"{args.command}.manifest", manifest)
    return 0


def main() -> None:
    sys.exit(run())

"""Joint source-channel exponents built from the source and channel pieces.

Primal forms minimize over the rate ``R`` carried by the channel code:

    E_J2 = min_R  t e(R/t) + max_Q E'_ex(Q, R)
    E_J1 = max_Q min_R  t e(R/t) + E_ex(Q, R)

Dual forms maximize over ``lambda >= 1`` against the concave hull of a
channel curve:

    sup_lambda  hull[max_Q E'_x(Q, .)](lambda) - t E_s(lambda)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._optim import Optimum, golden_max, pick_tied_max
from .channel import (
    RHO_MAX,
    RHO_POINTS,
    BhattacharyyaMatrix,
    WarmExPrime,
    _as_distance,
    _q_points,
    bhattacharyya,
    eex_ckm_primal,
    eex_prime_primal,
    ex_prime_dual_curve,
    ex_prime_dual_max,
    ex_prime_dual_table,
    ex_prime_zero_rate,
    ex_single_dual,
    ex_single_dual_curve,
    solve_output_distribution,
    zero_rate_limit,
)
from .hull import ExponentCurve, upper_concave_hull
from .prob import Channel, as_probs
from .source import _support, gallager_source_fn, source_reliability_primal

R_POINTS = 200
PRIMAL_R_POINTS = 41  # the primal objectives are convex in R, so a coarse scan + golden suffices


@dataclass(frozen=True)
class CodewordFamily:
    """A finite set of codeword compositions ``Q_1, ..., Q_m``."""

    members: tuple

    def __post_init__(self):
        members = tuple(as_probs(q).copy() for q in self.members)
        if not members:
            raise ValueError("a codeword family needs at least one member")
        if len({m.size for m in members}) != 1:
            raise ValueError("family members must share one input alphabet")
        object.__setattr__(self, "members", members)

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def as_array(self) -> np.ndarray:
        return np.stack(self.members)


@dataclass(frozen=True)
class Scenario:
    """Source law, transmission rate and channel with its distance matrix."""

    source: np.ndarray
    t: float
    channel: np.ndarray
    d: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError(f"transmission rate must be positive, got {self.t}")
        object.__setattr__(self, "source", as_probs(self.source))
        w = self.channel.rows if isinstance(self.channel, Channel) else Channel(self.channel).rows
        object.__setattr__(self, "channel", w)
        object.__setattr__(self, "d", bhattacharyya(w))

    @property
    def max_rate(self) -> float:
        """``t log |supp P_V|``; the source exponent is infinite beyond it."""
        return self.t * math.log(_support(self.source).size)


def _scenario(t, P_V, W) -> Scenario:
    return Scenario(P_V, t, W)


def rho_grid(rho_max: float = RHO_MAX, points: int = RHO_POINTS) -> np.ndarray:
    return np.geomspace(1.0, rho_max, points)


def rate_grid(max_rate: float, points: int = R_POINTS) -> np.ndarray:
    if max_rate <= 0:
        return np.zeros(1)
    return np.linspace(0.0, max_rate, points)


def source_term(R, t, p) -> float:
    """``t e(R/t, P_V)`` by the tilted-family primal."""
    return t * source_reliability_primal(max(R, 0.0) / t, p)


# --------------------------------------------------------------------------
# channel curves


def _distance(W):
    """Accept a channel (rows) or a ready distance matrix."""
    if isinstance(W, BhattacharyyaMatrix):
        return W
    return bhattacharyya(W)


def channel_max_curve(W, rhos=None, q_grid=None, grid_check: bool = False) -> ExponentCurve:
    """``max_Q E'_x(Q, rho)`` sampled on ``rhos`` with the maximizers in ``args``.

    ``meta['upper']`` holds the LP upper bound at each sample.
    """
    d = _distance(W)
    rhos = rho_grid() if rhos is None else np.asarray(rhos, dtype=float)
    values, Qs, upper = ex_prime_dual_curve(rhos, d, q_grid, grid_check=grid_check, return_bounds=True)
    return ExponentCurve(rhos, values, None, Qs, meta={"upper": upper})


def family_dual_curve(family: CodewordFamily, d, rhos=None) -> ExponentCurve:
    """Pointwise ``max_{Q in family} E'_x(Q, rho)``; ``args`` holds the winning member."""
    rhos = rho_grid() if rhos is None else np.asarray(rhos, dtype=float)
    Qs = family.as_array()
    table = ex_prime_dual_table(Qs, rhos, _as_distance(d))
    # lowest member index wins ties
    best = np.argmax(table >= table.max(axis=1, keepdims=True) - 1e-12, axis=1)
    values = table[np.arange(rhos.size), best]
    return ExponentCurve(rhos, values, None, Qs[best], meta={"member": best, "table": table})


# --------------------------------------------------------------------------
# sup over lambda of a hulled curve minus the source function


def _refine_edge(refine, grid, a: int, b: int, ya: float, yb: float, rounds: int = 20):
    """Move the ends of a hull chord to the points where the true curve touches it.

    Alternates between the chord slope and, at each end, the maximizer of
    ``refine(x) - slope x`` within one grid cell of the sampled vertex.  The
    fixed point is the bitangent of the curve.
    """
    xa, xb = grid[a], grid[b]
    ba = (grid[max(a - 1, 0)], grid[min(a + 1, grid.size - 1)])
    bb = (grid[max(b - 1, 0)], grid[min(b + 1, grid.size - 1)])
    for _ in range(rounds):
        slope = (yb - ya) / (xb - xa)
        na, _ = golden_max(lambda x: refine(x) - slope * x, *ba, tol=1e-10 * ba[1])
        nb, _ = golden_max(lambda x: refine(x) - slope * x, *bb, tol=1e-10 * bb[1])
        # keep a sampled end when the search does not improve on it
        ra, rb = refine(na), refine(nb)
        if ra - slope * na < ya - slope * xa:
            na, ra = xa, ya
        if rb - slope * nb < yb - slope * xb:
            nb, rb = xb, yb
        moved = abs(na - xa) + abs(nb - xb)
        xa, ya, xb, yb = na, ra, nb, rb
        if moved <= 1e-12 * xb:
            break
    return xa, ya, xb, yb


def _sup_hull_minus_source(curve: ExponentCurve, t, p, refine=None, limit=None) -> Optimum:
    """``sup_lambda hull(lambda) - t E_s(lambda)`` over the curve's grid.

    ``refine(lam)`` evaluates the unhulled curve between samples.  Around the
    best grid point every candidate is a lower bound on the true hull: the
    curve itself on cells where the hull follows it, and chords whose ends
    have been moved to the true tangent points elsewhere.  The best candidate
    wins; ``meta['edge']`` records ``(lam_a, g_a, lam_b, g_b)`` when it lies on
    a chord.
    """
    hull = upper_concave_hull(curve)
    lam = curve.grid
    Es = np.array([gallager_source_fn(x, p) for x in lam])
    obj = hull.values - t * Es
    i = int(np.argmax(obj))
    vertices = hull.meta["vertices"]
    best = (float(obj[i]), float(lam[i]), None)
    if refine is not None:
        lo_i, hi_i = max(i - 1, 0), min(i + 1, lam.size - 1)
        for a, b in zip(vertices[:-1], vertices[1:]):
            if b < lo_i or a > hi_i:
                continue
            if b == a + 1:
                # the hull follows the curve on this cell
                x, fx = golden_max(lambda x: refine(x) - t * gallager_source_fn(x, p), lam[a], lam[b], tol=1e-12)
                edge = None
            else:
                xa, ya, xb, yb = _refine_edge(refine, lam, a, b, curve.values[a], curve.values[b])

                def chord(x):
                    return ya + (yb - ya) * (x - xa) / (xb - xa) - t * gallager_source_fn(x, p)

                x, fx = golden_max(chord, xa, xb, tol=1e-12)
                edge = (xa, ya, xb, yb)
            if fx > best[0]:
                best = (float(fx), float(x), edge)
    fx, x, edge = best
    truncated = i == lam.size - 1
    at_lower = i == 0 and x <= lam[0] * (1 + 1e-9)
    meta = {"curve": curve, "hull": hull, "lambda_index": i, "grid_value": float(obj[i]), "edge": edge}
    lim = limit if truncated else None
    return Optimum(fx, x, at_lower=at_lower, truncated=truncated, limit=lim, meta=meta)


def _source_is_deterministic(p) -> bool:
    return _support(p).size == 1


def dual_family_exponent(t, P_V, family: CodewordFamily, W, rhos=None) -> Optimum:
    """``sup_{lambda >= 1} hull[max_{Q in family} E'_x(Q, .)](lambda) - t E_s(lambda)``."""
    sc = _scenario(t, P_V, W)
    curve = family_dual_curve(family, sc.d, rhos)
    Qs = family.as_array()

    def refine(lam):
        B = sc.d.kernel(lam)
        vals, _, _ = solve_output_distribution(Qs, B, lam)
        return float(vals.max())

    limit = max(zero_rate_limit(q, sc.d) for q in family) if _source_is_deterministic(sc.source) else None
    return _sup_hull_minus_source(curve, sc.t, sc.source, refine, limit)


def csiszar_dual_exponent(t, P_V, W, q_grid=None, rhos=None, curve: ExponentCurve | None = None) -> Optimum:
    """``sup_{lambda >= 1} hull[max_Q E'_x(Q, .)](lambda) - t E_s(lambda)``.

    The result's ``meta`` carries the sampled curve and hull; ``arg`` is the
    optimal lambda.
    """
    sc = _scenario(t, P_V, W)
    if curve is None:
        curve = channel_max_curve(sc.d, rhos, q_grid)

    def refine(lam):
        vals, _ = ex_prime_dual_curve([lam], sc.d)
        return float(vals[0])

    limit = ex_prime_zero_rate(sc.d)[0] if _source_is_deterministic(sc.source) else None
    return _sup_hull_minus_source(curve, sc.t, sc.source, refine, limit)


def single_class_dual_exponent(t, P_V, W, q_grid=None, rhos=None) -> Optimum:
    """``sup_{rho >= 1} max_Q E_x(Q, rho) - t E_s(rho)``, no hull."""
    sc = _scenario(t, P_V, W)
    rhos = rho_grid() if rhos is None else np.asarray(rhos, dtype=float)
    values, Qs = ex_single_dual_curve(rhos, sc.d, q_grid)
    Es = np.array([gallager_source_fn(r, sc.source) for r in rhos])
    obj = values - sc.t * Es
    i = int(np.argmax(obj))
    Q = Qs[i]

    def objective(r):
        return ex_single_dual(Q, r, sc.d) - sc.t * gallager_source_fn(r, sc.source)

    lo, hi = rhos[max(i - 1, 0)], rhos[min(i + 1, rhos.size - 1)]
    x, fx = golden_max(objective, lo, hi, tol=1e-10)
    if obj[i] >= fx:
        x, fx = rhos[i], obj[i]
    curve = ExponentCurve(rhos, values, None, Qs)
    return Optimum(float(fx), float(x), at_lower=i == 0, truncated=i == rhos.size - 1, meta={"curve": curve, "Q": Q})


# --------------------------------------------------------------------------
# primal joint exponents


def _min_over_rates(fn, rates) -> Optimum:
    """Minimize ``fn`` on a rate grid, then golden-refine between the neighbours."""
    vals = np.array([fn(R) for R in rates])
    i = int(np.argmin(vals))
    if rates.size == 1:
        return Optimum(float(vals[0]), float(rates[0]), meta={"values": vals})
    lo, hi = rates[max(i - 1, 0)], rates[min(i + 1, rates.size - 1)]
    x, neg = golden_max(lambda R: -fn(R), lo, hi, tol=1e-10)
    value, arg = (float(vals[i]), float(rates[i])) if vals[i] <= -neg else (-neg, float(x))
    return Optimum(value, arg, at_lower=arg == 0.0, truncated=arg >= rates[-1], meta={"values": vals, "rates": rates})


def joint_exponent_primal(t, P_V, W, family: CodewordFamily, r_points: int = PRIMAL_R_POINTS) -> Optimum:
    """``min_R t e(R/t) + max_{Q in family} E'_ex(Q, R)``; ``arg`` is the minimizing R."""
    sc = _scenario(t, P_V, W)

    def fn(R):
        return source_term(R, sc.t, sc.source) + max(eex_prime_primal(q, R, sc.d) for q in family)

    return _min_over_rates(fn, rate_grid(sc.max_rate, r_points))


def _best_q_at_rate(curve: ExponentCurve, R: float) -> np.ndarray:
    """Maximizer of ``E'_ex(., R)``: the curve's argmax at the rho attaining ``sup_rho curve - rho R``."""
    i = int(np.argmax(curve.values - curve.grid * R))
    return curve.args[i]


class _RateMaximizers:
    """Candidate maximizers of ``E'_ex(., R)`` read off the max-curve of E'_x.

    Every local maximum of ``g(rho) - rho R`` on the samples is refined
    between its neighbours on the exact curve (the sampled peak can sit a
    whole cell away from the true one next to a hull chord).  Compositions
    of all refined peaks within ``tie`` of the best are returned.
    """

    def __init__(self, curve: ExponentCurve, d, tie: float = 1e-6):
        self.curve = curve
        self.d = d
        self.tie = tie
        self._cache = {}

    def _exact(self, rho):
        if rho not in self._cache:
            self._cache[rho] = ex_prime_dual_max(rho, self.d, grid_check=False)
        return self._cache[rho]

    def __call__(self, R: float):
        g, x = self.curve.values, self.curve.grid
        o = g - x * R
        peaks = [j for j in range(o.size)
                 if (j == 0 or o[j] >= o[j - 1]) and (j == o.size - 1 or o[j] >= o[j + 1])]
        found = []
        for j in peaks:
            lo, hi = x[max(j - 1, 0)], x[min(j + 1, x.size - 1)]
            r, fr = golden_max(lambda r: self._exact(r)[0] - r * R, lo, hi, tol=1e-9 * hi)
            found.append((fr, self._exact(r)[1]) if fr > o[j] else (o[j], self.curve.args[j]))
        top = max(f for f, _ in found)
        return [Q for f, Q in found if f >= top - self.tie]


def joint_exponent_EJ2(t, P_V, W, q_grid=None, rhos=None, r_points: int = PRIMAL_R_POINTS, curve=None) -> Optimum:
    """``min_R t e(R/t) + max_Q E'_ex(Q, R)`` evaluated in the primal.

    For each R the candidate maximizing compositions are read off the
    max-curve of E'_x (swapping ``max_Q`` and ``sup_rho``), then E'_ex at each
    is solved as the primal program over joint distributions.  At ``R = 0``
    the exact zero-rate maximizer is used instead.
    """
    sc = _scenario(t, P_V, W)
    if curve is None:
        curve = channel_max_curve(sc.d, rhos, q_grid)
    zero_value, zero_Q = ex_prime_zero_rate(sc.d)
    candidates = _RateMaximizers(curve, sc.d)
    chosen = {}

    def inner(R):
        if R <= 0:
            return zero_value
        vals = [(eex_prime_primal(Q, R, sc.d), Q) for Q in candidates(R)]
        v, chosen[R] = max(vals, key=lambda vq: vq[0])
        return v

    def fn(R):
        return source_term(R, sc.t, sc.source) + inner(R)

    res = _min_over_rates(fn, rate_grid(sc.max_rate, r_points))
    Q = zero_Q if res.arg <= 0 else chosen.get(res.arg, _best_q_at_rate(curve, res.arg))
    rho_i = int(np.argmax(curve.values - curve.grid * res.arg))
    truncated = rho_i == curve.grid.size - 1
    limit = zero_value if truncated and res.arg <= 0 else None
    return Optimum(res.value, res.arg, at_lower=res.at_lower, truncated=truncated, limit=limit,
                   meta={**res.meta, "Q": Q, "curve": curve})


def joint_exponent_EJ1(t, P_V, W, q_grid=None, r_points: int = 60) -> Optimum:
    """``max_Q min_R t e(R/t) + E_ex(Q, R)`` with the CKM exponent.

    The inner function is convex in R, so the inner minimum is a golden
    search after a coarse scan of ``r_points`` rates.  The outer maximum runs
    over the simplex grid; ``arg`` is the optimal inner rate and
    ``meta['Q']`` the optimal composition.
    """
    sc = _scenario(t, P_V, W)
    rates = rate_grid(sc.max_rate, r_points)
    pts = _q_points(sc.d.size, q_grid)

    def inner(Q):
        return _min_over_rates(lambda R: source_term(R, sc.t, sc.source) + eex_ckm_primal(Q, R, sc.d), rates)

    results = [inner(Q) for Q in pts]
    vals = np.array([r.value for r in results])
    j = pick_tied_max(vals, pts)
    best = results[j]
    return Optimum(best.value, best.arg, meta={"Q": pts[j], "values": vals, "points": pts})


# --------------------------------------------------------------------------
# per-type exponents of a class-based partition


@dataclass(frozen=True)
class TypeExponentTable:
    """Per-source-type exponents of a partition plan.

    ``primal[i] = t e(R_i/t) + E'_ex(Q_c, R_i)`` and
    ``dual[i] = sup_rho [E'_x(Q_c, rho) - rho R_i] + sup_{lambda>=1} [lambda R_i - t E_s(lambda)]``
    where ``c`` is the class of type ``i``.  ``overall`` is the smallest dual
    row: the exponent of a sum of polynomially many terms.
    """

    types: object
    classes: np.ndarray
    Q: np.ndarray
    primal: np.ndarray
    dual: np.ndarray
    rho: np.ndarray
    lam: np.ndarray
    rho_truncated: np.ndarray

    @property
    def overall(self) -> float:
        return float(self.dual.min())

    @property
    def overall_primal(self) -> float:
        return float(self.primal.min())

    @property
    def argmin(self) -> int:
        return int(np.argmin(self.dual))

    def rows(self):
        for i in range(len(self.dual)):
            yield {
                "type": self.types.types[i],
                "log_count": float(self.types.log_counts[i]),
                "rate": float(self.types.rates[i]),
                "class": int(self.classes[i]),
                "primal": float(self.primal[i]),
                "dual": float(self.dual[i]),
                "rho": float(self.rho[i]),
                "lambda": float(self.lam[i]),
            }


def _channel_sups(Q, rates, d, rhos):
    """``sup_{rho>=1} E'_x(Q, rho) - rho R`` for every R, sharing one rho table."""
    values = ex_prime_dual_table(Q[None], rhos, d)[:, 0]

    fn = WarmExPrime(Q, d)
    out = []
    for R in rates:
        obj = values - rhos * R
        i = int(np.argmax(obj))
        lo, hi = rhos[max(i - 1, 0)], rhos[min(i + 1, rhos.size - 1)]
        x, fx = golden_max(lambda r: fn(r) - r * R, lo, hi, tol=1e-11 * hi)
        if obj[i] >= fx:
            x, fx = rhos[i], obj[i]
        out.append((float(fx), float(x), i == rhos.size - 1))
    return out


def _source_sup(R, t, p):
    """``(sup_{lambda>=1} lambda R - t E_s(lambda), argmax)``; concave in lambda."""
    return golden_max(lambda lam: lam * R - t * gallager_source_fn(lam, p), 1.0, RHO_MAX, tol=1e-13)


def per_type_exponent_table(t, P_V, W, plan, rhos=None, primal: bool = True) -> TypeExponentTable:
    """Primal and dual exponent of every source type under ``plan``.

    ``plan`` needs ``types`` (a SourceTypeTable), ``assignment`` (class index
    per type) and ``classes`` (objects with a ``Q`` attribute).  Setting
    ``primal=False`` skips the primal programs.
    """
    sc = _scenario(t, P_V, W)
    rhos = rho_grid() if rhos is None else np.asarray(rhos, dtype=float)
    types = plan.types
    assignment = np.asarray(plan.assignment)
    rates = np.asarray(types.rates, dtype=float)
    n = rates.size
    X = sc.d.size
    Qrows = np.empty((n, X))
    dual = np.empty(n)
    prim = np.full(n, np.nan)
    rho = np.empty(n)
    lam = np.empty(n)
    trunc = np.zeros(n, dtype=bool)
    for c in np.unique(assignment):
        members = np.flatnonzero(assignment == c)
        Q = as_probs(plan.classes[c].Q)
        sups = _channel_sups(Q, rates[members], sc.d, rhos)
        for i, (val, r, tr) in zip(members, sups):
            lm, src = _source_sup(rates[i], sc.t, sc.source)
            Qrows[i] = Q
            dual[i] = val + src
            rho[i], lam[i], trunc[i] = r, lm, tr
            if primal:
                prim[i] = source_term(rates[i], sc.t, sc.source) + eex_prime_primal(Q, rates[i], sc.d)
    return TypeExponentTable(types, assignment, Qrows, prim, dual, rho, lam, trunc)

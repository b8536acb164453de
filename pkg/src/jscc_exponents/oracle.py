"""Brute-force reference values for the expurgated exponents.

These routines deliberately avoid the solvers in the channel and joint
modules: they enumerate joint distributions on a grid and take the best
feasible one.  Being naive is the point.  ``duality_report`` then puts the
primal and dual routes of the main solvers side by side.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .prob import as_channel, as_probs

MAX_GRID = 5 * 10**7
CHUNK = 1 << 20
FEAS_TOL = 1e-12  # rounding allowance on the information constraint


def _simplex_points(size: int, resolution: float) -> np.ndarray:
    """All probability vectors with entries on multiples of ``1/m``, ``m = round(1/resolution)``."""
    m = int(round(1.0 / resolution))
    pts = [c for c in itertools.product(range(m + 1), repeat=size - 1) if sum(c) <= m]
    arr = np.array([list(c) + [m - sum(c)] for c in pts], dtype=float)
    return arr / m


def _distance_matrix(d) -> np.ndarray:
    D = np.asarray(getattr(d, "d", d), dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError("distance matrix must be square")
    return D


def _objective(P, Q, Qbar, D):
    """``(E[d], I)`` for a stack of joints ``P`` (N, X, X) with row marginal ``Q``."""
    ref = Q[None, :, None] * Qbar[:, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        ed = np.where(P > 0, P * D[None], 0.0).sum(axis=(1, 2))
        mi = np.where(P > 0, P * np.log(P / ref), 0.0).sum(axis=(1, 2))
    return ed, np.maximum(mi, 0.0)


def lipschitz_tolerance(resolution: float, d) -> float:
    """Grid resolution converted to nats: ``resolution * (max finite d + log(1/resolution))``."""
    D = _distance_matrix(d)
    finite = D[np.isfinite(D)]
    return resolution * (finite.max(initial=0.0) + math.log(1.0 / resolution))


def _check_inputs(Q, R, resolution, size_cap=3):
    Q = as_probs(Q)
    if Q.size > size_cap:
        raise ValueError(f"brute force supports at most {size_cap} inputs, got {Q.size}")
    if R < 0:
        raise ValueError("rate must be non-negative")
    if resolution < 0.01 - 1e-15 or resolution > 1:
        raise ValueError("resolution must lie in [0.01, 1]")
    return Q


def brute_force_weak_exponent(Q, R: float, d, resolution: float = 0.02, slack: float = 0.0) -> float:
    """``min E[d] + I - R`` over joints with row marginal ``Q`` and ``I <= R + slack``.

    Each conditional row ``V(.|x)`` runs over the simplex grid of the given
    resolution, avoiding infinite distances; rows with ``Q(x) = 0`` are left
    out.  With the default ``slack = 0`` every grid point is feasible for
    the true program, so the result is an upper bound on the true minimum.
    """
    Q = _check_inputs(Q, R, resolution)
    D = _distance_matrix(d)
    X = Q.size
    grid = _simplex_points(X, resolution)
    rows = []
    for x in range(X):
        if Q[x] == 0:
            rows.append(np.full((1, X), 1.0 / X))
            continue
        ok = ~np.any((grid > 0) & np.isinf(D[x])[None, :], axis=1)
        rows.append(grid[ok])
    total = math.prod(len(r) for r in rows)
    if total > MAX_GRID:
        raise OverflowError(f"{total} grid joints exceed the cap {MAX_GRID}; coarsen the resolution")
    Dz = np.where(np.isinf(D), 0.0, D)  # only reached with zero mass
    best = math.inf
    sizes = [len(r) for r in rows]
    for start in range(0, total, CHUNK):
        flat = np.arange(start, min(start + CHUNK, total))
        idx = np.unravel_index(flat, sizes)
        V = np.stack([rows[x][idx[x]] for x in range(X)], axis=1)
        P = Q[None, :, None] * V
        Qbar = P.sum(axis=1)
        ed, mi = _objective(P, Q, Qbar, Dz)
        val = np.where(mi <= R + slack + FEAS_TOL, ed + mi - R, math.inf)
        best = min(best, float(val.min()))
    return best


def _coupling_grid_binary(q: float, step: float) -> np.ndarray:
    lo, hi = max(0.0, 2 * q - 1), q
    m = max(1, int(math.ceil((hi - lo) / step - 1e-9)))
    # the independent coupling (the only one with I = 0) is always included
    a = np.unique(np.append(np.linspace(lo, hi, m + 1), q * q))
    P = np.empty((a.size, 2, 2))
    P[:, 0, 0] = a
    P[:, 0, 1] = P[:, 1, 0] = q - a
    P[:, 1, 1] = 1 - 2 * q + a
    return np.clip(P, 0.0, None)


def _coupling_grid_ternary(Q, resolution: float) -> np.ndarray:
    """Couplings of (Q, Q) with the upper-left 2x2 block on a grid."""
    m = int(round(1.0 / resolution))
    v = np.arange(m + 1) / m
    a, b, c, e = np.meshgrid(v, v, v, v, indexing="ij")
    a, b, c, e = (z.ravel() for z in (a, b, c, e))
    P = np.empty((a.size, 3, 3))
    P[:, 0, 0], P[:, 0, 1], P[:, 1, 0], P[:, 1, 1] = a, b, c, e
    P[:, 0, 2] = Q[0] - a - b
    P[:, 1, 2] = Q[1] - c - e
    P[:, 2, 0] = Q[0] - a - c
    P[:, 2, 1] = Q[1] - b - e
    P[:, 2, 2] = Q[2] - P[:, 0, 2] - P[:, 1, 2]
    ok = np.all(P >= -1e-12, axis=(1, 2))
    return np.concatenate([np.clip(P[ok], 0.0, None), np.outer(Q, Q)[None]])


def brute_force_ckm_exponent(Q, R: float, d, resolution: float = 0.02, slack: float = 0.0) -> float:
    """``min E[d] + I - R`` over couplings with both marginals ``Q`` and ``I <= R + slack``.

    Binary inputs use the one free parameter ``alpha = P(0, 0)`` scanned in
    steps of ``min(resolution, 1e-4)``; ternary inputs grid the upper-left
    2x2 block.
    """
    Q = _check_inputs(Q, R, resolution)
    D = _distance_matrix(d)
    if Q.size == 1:
        return -R
    if Q.size == 2:
        P = _coupling_grid_binary(float(Q[0]), min(resolution, 1e-4))
    else:
        P = _coupling_grid_ternary(Q, resolution)
    P = P[~np.any((P > 0) & np.isinf(D)[None], axis=(1, 2))]
    if P.shape[0] == 0:
        return math.inf
    ed, mi = _objective(P, Q, np.broadcast_to(Q, (P.shape[0], Q.size)), np.where(np.isinf(D), 0.0, D))
    val = np.where(mi <= R + slack + FEAS_TOL, ed + mi - R, math.inf)
    return float(val.min())


# --------------------------------------------------------------------------
# primal versus dual comparison of the main solvers


@dataclass(frozen=True)
class DualityRow:
    quantity: str
    x: float
    primal: float
    dual: float
    flagged: bool

    @property
    def gap(self) -> float:
        if math.isinf(self.primal) and math.isinf(self.dual) and self.primal == self.dual:
            return 0.0
        return abs(self.primal - self.dual)


@dataclass(frozen=True)
class DualityReport:
    rows: list = field(default_factory=list)
    tolerance: float = 1e-3

    def max_gap(self, quantity: str | None = None, include_flagged: bool = False) -> float:
        gaps = [r.gap for r in self.rows
                if (quantity is None or r.quantity == quantity) and (include_flagged or not r.flagged)]
        return max(gaps, default=0.0)

    def unexplained(self) -> list:
        """Rows whose gap exceeds the tolerance without a boundary flag."""
        return [r for r in self.rows if not r.flagged and r.gap > self.tolerance]


def duality_report(t, P_V, W, rhos=None, r_points: int = 50, channel_points: int = 20,
                   compositions=None, joint: bool = True, tolerance: float = 1e-3) -> DualityReport:
    """Primal against dual values of e(R), E'_ex(Q, R) and E_J2 versus the Csiszar dual."""
    from .channel import bhattacharyya, eex_prime_from_dual, eex_prime_primal
    from .joint import csiszar_dual_exponent, joint_exponent_EJ2
    from .source import source_reliability_dual_opt, source_reliability_primal

    p = as_probs(P_V)
    W = as_channel(W)
    rows = []
    support = int(np.count_nonzero(p))
    for R in np.linspace(0.0, math.log(support), r_points):
        dual = source_reliability_dual_opt(R, p)
        rows.append(DualityRow("source", float(R), source_reliability_primal(R, p), dual.value, dual.truncated))
    d = bhattacharyya(W)
    X = d.size
    if compositions is None:
        compositions = [np.full(X, 1.0 / X)]
    for j, Q in enumerate(compositions):
        Q = as_probs(Q)
        for R in np.linspace(0.0, math.log(X), channel_points):
            dual = eex_prime_from_dual(Q, R, d)
            dual_value = dual.limit if dual.limit is not None else dual.value
            rows.append(DualityRow(f"channel[{j}]", float(R), eex_prime_primal(Q, R, d), dual_value,
                                   dual.truncated or dual.at_lower))
    if joint:
        cs = csiszar_dual_exponent(t, p, W, rhos=rhos)
        ej2 = joint_exponent_EJ2(t, p, W, rhos=rhos, curve=cs.meta["curve"])
        rows.append(DualityRow("joint", float(t), ej2.value, cs.value, cs.flagged or ej2.flagged))
    return DualityReport(rows, tolerance)

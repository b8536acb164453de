"""Bhattacharyya geometry and expurgated channel exponents.

Four exponent functions live here:

* ``ex_prime_dual``      E'_x(Q, rho) = min_{Q'} -rho sum_x Q(x) log sum_xb Q'(xb) exp(-d/rho)
* ``ex_single_dual``     E_x(Q, rho), the same expression with Q' = Q and a tilt a(.)
* ``eex_prime_primal``   weak expurgated exponent E'_ex(Q, R) over joints with P_X = Q
* ``eex_ckm_primal``     CKM exponent E_ex(Q, R), both marginals pinned to Q

``eex_prime_from_dual`` evaluates E'_ex through ``sup_{rho>=1} E'_x - rho R``.
Everything is in nats.  Infinite distances are legal and make the
corresponding kernel entries exactly zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from ._optim import Optimum, golden_max, golden_max_batch, pick_tied_max, simplex_grid
from .prob import as_channel, as_probs

RHO_MAX = 1e4
RHO_POINTS = 200
FW_TOL = 1e-10
FW_MAX_ITER = 100_000
FW_WARM_ITER = 300
FW_POLISH_COST = 500  # iteration budget charged per Newton/Frank-Wolfe round


@dataclass(frozen=True)
class BhattacharyyaMatrix:
    """Pairwise Bhattacharyya distances ``d[x, xb]`` of a channel's input letters."""

    d: np.ndarray

    def __post_init__(self):
        d = np.array(self.d, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError(f"distance matrix must be square, got {d.shape}")
        if np.any(np.isnan(d)) or np.any(d < 0):
            raise ValueError("distances must be non-negative")
        if np.any(np.diag(d) != 0):
            raise ValueError("self-distances must be zero")
        if not np.array_equal(d, d.T):
            raise ValueError("distance matrix must be symmetric")
        d.setflags(write=False)
        object.__setattr__(self, "d", d)

    @property
    def size(self) -> int:
        return self.d.shape[0]

    def kernel(self, rho: float) -> np.ndarray:
        """``exp(-d / rho)`` with ``exp(-inf) = 0``."""
        return np.exp(-self.d / rho)

    def __array__(self, dtype=None, copy=None):
        return self.d if dtype is None else self.d.astype(dtype)


@dataclass(frozen=True)
class TiltVector:
    """Tilt ``a(x)`` normalized so that ``sum_x Q(x) a(x) = 0``."""

    a: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if not np.all(np.isfinite(a)):
            raise ValueError("tilt entries must be finite")
        if abs(float(np.dot(self.Q, a))) > 1e-9 * max(1.0, float(np.abs(a).max(initial=0.0))):
            raise ValueError("tilt is not normalized against Q")
        object.__setattr__(self, "a", a)


def bhattacharyya(W) -> BhattacharyyaMatrix:
    """``d(x, xb) = -log sum_y sqrt(W(y|x) W(y|xb))``."""
    w = as_channel(W)
    root = np.sqrt(w)
    overlap = np.minimum(root @ root.T, 1.0)
    overlap = 0.5 * (overlap + overlap.T)
    with np.errstate(divide="ignore"):
        d = -np.log(overlap)
    d = np.maximum(d, 0.0)
    np.fill_diagonal(d, 0.0)
    return BhattacharyyaMatrix(d)


def _as_distance(d) -> BhattacharyyaMatrix:
    if isinstance(d, BhattacharyyaMatrix):
        return d
    return BhattacharyyaMatrix(d)


def zero_rate_limit(Q, d) -> float:
    """``lim_{rho->inf} E'_x(Q, rho) = min_xb sum_x Q(x) d(x, xb)``.

    This is also ``E'_ex(Q, 0)``: the independent coupling ``Q x Q'`` with
    the best point-mass ``Q'``.
    """
    Q = as_probs(Q)
    D = _as_distance(d).d
    with np.errstate(invalid="ignore"):
        col = np.where(Q[:, None] > 0, Q[:, None] * D, 0.0).sum(axis=0)
    return float(col.min())


# --------------------------------------------------------------------------
# E'_x(Q, rho): convex minimization over Q' by pairwise Frank-Wolfe


def _fw_line_search(Q, pos, u, delta, gmax, iters=60):
    """Exact step for ``phi(g) = -sum_x Q(x) log(u(x) + g delta(x))`` on ``[0, gmax]``."""

    def derivs(g):
        den = u + g[:, None] * delta
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(pos, delta / den, 0.0)
        return -(Q * ratio).sum(axis=1), (Q * ratio * ratio).sum(axis=1)

    d_end, _ = derivs(gmax)
    to_end = d_end <= 0
    lo = np.zeros_like(gmax)
    hi = gmax.copy()
    g = np.zeros_like(gmax)
    for _ in range(iters):
        f1, f2 = derivs(g)
        lo = np.where(f1 < 0, g, lo)
        hi = np.where(f1 >= 0, g, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = g - f1 / f2
        bad = ~np.isfinite(step) | (step <= lo) | (step >= hi)
        nxt = np.where(bad, 0.5 * (lo + hi), step)
        done = np.abs(nxt - g) <= 1e-15 * (1.0 + gmax)
        g = nxt
        if np.all(done):
            break
    return np.where(to_end, gmax, g), to_end


def _fw_iterations(Q, B, rho, P, pos, tol, iters):
    """Run up to ``iters`` pairwise Frank-Wolfe steps in place; returns the gaps."""
    N = Q.shape[0]
    idx = np.arange(N)
    gaps = np.full(N, np.inf)
    for _ in range(iters):
        u = np.einsum("nxy,ny->nx", B, P)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(pos, Q / u, 0.0)
        r = np.einsum("nxy,nx->ny", B, w)
        s = r.argmax(axis=1)
        gaps = rho * (r[idx, s] - 1.0)
        active = gaps > tol
        if not active.any():
            break
        a = np.where(P > 0, r, np.inf).argmin(axis=1)
        delta = B[idx, :, s] - B[idx, :, a]
        gmax = P[idx, a]
        g, to_end = _fw_line_search(Q, pos, u, delta, gmax)
        g = np.where(active, g, 0.0)
        P[idx, s] += g
        P[idx, a] = np.where(active & to_end, 0.0, P[idx, a] - g)
    return gaps


def _objective(q, pos, B, p):
    u = B @ p
    if np.any(u[pos] <= 0):
        return math.inf
    return float(-np.sum(q[pos] * np.log(u[pos])))


def _face_newton(q, pos, B, p, steps=30):
    """Newton steps restricted to the support face of ``p`` (one instance, in place).

    Pairwise Frank-Wolfe crawls when the optimum sits on an ill-conditioned
    face; a few constrained Newton steps finish the job.  Coordinates that
    would turn negative are clipped to zero by the ratio test.
    """
    f = _objective(q, pos, B, p)
    for _ in range(steps):
        S = np.flatnonzero(p > 0)
        if S.size < 2:
            return
        u = B @ p
        w = np.where(pos, q / np.where(pos, u, 1.0), 0.0)
        g = -(B.T @ w)[S]
        Bs = B[:, S]
        H = Bs.T @ ((w * w / np.where(q > 0, q, 1.0))[:, None] * Bs)
        m = S.size
        kkt = np.zeros((m + 1, m + 1))
        kkt[:m, :m] = H + 1e-12 * (1.0 + np.trace(H)) * np.eye(m)
        kkt[:m, m] = kkt[m, :m] = 1.0
        try:
            step = np.linalg.solve(kkt, np.append(-g, 0.0))[:m]
        except np.linalg.LinAlgError:
            return
        dec = float(g @ step)
        if not dec < -1e-18:
            return
        neg = step < 0
        amax = float(np.min(-p[S][neg] / step[neg])) if neg.any() else math.inf
        alpha = min(1.0, amax)
        while alpha > 1e-12:
            trial = p.copy()
            trial[S] = np.maximum(p[S] + alpha * step, 0.0)
            if alpha == amax:
                trial[S[neg][np.argmin(-p[S][neg] / step[neg])]] = 0.0
            trial /= trial.sum()
            ft = _objective(q, pos, B, trial)
            if ft <= f + 1e-4 * alpha * dec:
                break
            alpha *= 0.5
        else:
            return
        p[:] = trial
        f = ft


def solve_output_distribution(Q, B, rho, tol=FW_TOL, max_iter=FW_MAX_ITER, start=None):
    """Batched minimizer of ``-rho sum_x Q(x) log (B Q')(x)`` over the simplex.

    Pairwise Frank-Wolfe with exact line search; instances still above
    ``tol`` after a short run alternate face-restricted Newton polishing
    with further Frank-Wolfe steps, which add or drop support points.

    Parameters
    ----------
    Q : (N, X) array of input distributions.
    B : (N, X, X) or (X, X) kernel ``exp(-d/rho)``.
    rho : (N,) array or scalar.
    start : optional (N, X) warm start; defaults to ``Q`` itself.

    Returns
    -------
    values : (N,) objective at the returned points.
    Qp : (N, X) minimizers.
    gaps : (N,) Frank-Wolfe duality gaps (already scaled by rho).
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    N, X = Q.shape
    B = np.asarray(B, dtype=float)
    if B.ndim == 2:
        B = np.broadcast_to(B, (N, X, X))
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (N,))
    P = Q.copy() if start is None else np.array(start, dtype=float)
    pos = Q > 0
    # small problems switch to Newton polishing early; big batches stay vectorized longer
    first = min(max_iter, FW_WARM_ITER if N > 8 else 20)
    gaps = _fw_iterations(Q, B, rho, P, pos, tol, first)
    budget = max_iter - first
    for i in np.flatnonzero(gaps > tol):
        left = budget
        while gaps[i] > tol and left > 0:
            _face_newton(Q[i], pos[i], B[i], P[i])
            chunk = min(left, 20)
            gaps[i] = _fw_iterations(Q[i:i + 1], B[i:i + 1], rho[i:i + 1], P[i:i + 1], pos[i:i + 1], tol, chunk)[0]
            left -= FW_POLISH_COST
    u = np.einsum("nxy,ny->nx", B, P)
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(pos, Q * np.log(u), 0.0)
    return -rho * logs.sum(axis=1), P, np.maximum(gaps, 0.0)


def ex_prime_dual(Q, rho, d, grid_check: bool = True, return_minimizer: bool = False):
    """E'_x(Q, rho) for rho >= 1.

    Solved by pairwise Frank-Wolfe with exact line search from ``Q' = Q``.
    For ``|X| <= 4`` a 0.02-resolution simplex grid over ``Q'`` is also
    scanned and, if it beats the iterate, used as a restart.
    """
    if rho < 1:
        raise ValueError(f"rho must be >= 1, got {rho}")
    Q = as_probs(Q)
    dm = _as_distance(d)
    if Q.size != dm.size:
        raise ValueError("Q and distance matrix disagree on the input alphabet")
    B = dm.kernel(rho)
    vals, P, _ = solve_output_distribution(Q[None], B, rho)
    value, Qp = float(vals[0]), P[0]
    if grid_check and Q.size <= 4:
        pts = simplex_grid(Q.size, 0.02)
        u = pts @ B.T
        pos = Q > 0
        with np.errstate(divide="ignore"):
            grid_vals = -rho * (np.log(u[:, pos]) * Q[pos]).sum(axis=1)
        j = int(np.argmin(grid_vals))
        if grid_vals[j] < value - 1e-12:
            vals, P, _ = solve_output_distribution(Q[None], B, rho, start=pts[j][None])
            if vals[0] < value:
                value, Qp = float(vals[0]), P[0]
    value = max(value, 0.0)
    return (value, Qp) if return_minimizer else value


def ex_prime_dual_table(Qs, rhos, d, tol=FW_TOL, batch=20_000):
    """E'_x on every pair of ``Qs`` (M, X) and ``rhos`` (K,), shape (K, M)."""
    Qs = np.atleast_2d(np.asarray(Qs, dtype=float))
    rhos = np.atleast_1d(np.asarray(rhos, dtype=float))
    dm = _as_distance(d)
    M = len(Qs)
    out = np.empty((len(rhos), M))
    per = max(1, batch // M)
    for k0 in range(0, len(rhos), per):
        rh = rhos[k0:k0 + per]
        B = np.repeat(np.stack([dm.kernel(r) for r in rh]), M, axis=0)
        vals, _, _ = solve_output_distribution(np.tile(Qs, (len(rh), 1)), B, np.repeat(rh, M), tol=tol)
        out[k0:k0 + per] = np.maximum(vals, 0.0).reshape(len(rh), M)
    return out


def _default_resolution(size: int) -> float:
    if size <= 3:
        return 0.01
    if size == 4:
        return 0.05
    raise ValueError(f"|X| = {size} > 4 needs an explicit q_grid")


def _q_points(size, q_grid):
    if q_grid is None:
        return simplex_grid(size, _default_resolution(size))
    if np.isscalar(q_grid):
        return simplex_grid(size, float(q_grid))
    pts = np.atleast_2d(np.asarray(q_grid, dtype=float))
    if pts.shape[1] != size:
        raise ValueError("q_grid points have the wrong alphabet size")
    return pts


def _polish(evaluate, Q0, sweeps=30, iters=50, tol=1e-12):
    """Coordinate-wise ascent by mass transfers between pairs of letters.

    ``evaluate`` maps an (N, X) batch of distributions to (N,) values;
    ``Q0`` is (N, X).  Every pair transfer is a batched golden-section
    search; only strict improvements are accepted.
    """
    Q = np.array(Q0, dtype=float)
    X = Q.shape[1]
    best = evaluate(Q)
    if X == 1:
        return Q, best
    pairs = [(i, j) for i in range(X) for j in range(i + 1, X)]
    for _ in range(sweeps):
        start = best.copy()
        for i, j in pairs:
            lo = -Q[:, i]
            hi = Q[:, j]

            def shifted(delta, i=i, j=j, base=Q):
                cand = base.copy()
                cand[:, i] += delta
                cand[:, j] -= delta
                np.clip(cand, 0.0, None, out=cand)
                return evaluate(cand)

            delta, val = golden_max_batch(shifted, lo, hi, iters=iters)
            better = val > best + tol
            Q[better, i] += delta[better]
            Q[better, j] -= delta[better]
            np.clip(Q, 0.0, None, out=Q)
            best = np.where(better, val, best)
        if np.all(best - start <= tol):
            break
    return Q, best


def _max_over_q(table_fn, eval_fn, rhos, size, q_grid, polish, seeds=None):
    """Shared grid-then-polish driver for the ``max_Q`` exponent curves.

    ``seeds`` optionally adds one candidate distribution per rho; it wins
    over the grid point only on a strict improvement.
    """
    pts = _q_points(size, q_grid)
    table = table_fn(pts, rhos)
    idx = np.array([pick_tied_max(row, pts) for row in table])
    Qbest = pts[idx].copy()
    vbest = table[np.arange(len(rhos)), idx]
    if seeds is not None:
        vseed = eval_fn(seeds, rhos)
        gain = vseed > vbest + 1e-12
        Qbest[gain] = seeds[gain]
        vbest = np.where(gain, vseed, vbest)
    if polish and size > 1:
        Qpol, vpol = _polish(lambda Qb: eval_fn(Qb, rhos), Qbest)
        gain = vpol > vbest + 1e-12
        Qbest[gain] = Qpol[gain]
        vbest = np.where(gain, vpol, vbest)
    return vbest, Qbest


def _matrix_game(B):
    """Value and optimal strategies of the zero-sum game with payoff ``B``.

    Returns ``(v, Q, Qp)`` with ``v = max_Qp min_x (B Qp)(x)``; ``Q`` is the
    minimizing player's optimal mixed strategy read off the LP duals.
    """
    X = B.shape[0]
    c = np.r_[np.zeros(X), -1.0]
    res = linprog(
        c,
        A_ub=np.c_[-B, np.ones(X)],
        b_ub=np.zeros(X),
        A_eq=np.r_[np.ones(X), 0.0][None],
        b_eq=[1.0],
        bounds=[(0, None)] * X + [(None, None)],
        method="highs",
    )
    if res.status != 0:
        raise RuntimeError(f"matrix game LP failed: {res.message}")
    Qp = np.clip(res.x[:X], 0.0, None)
    Q = np.clip(-res.ineqlin.marginals, 0.0, None)
    return float(res.x[-1]), Q / Q.sum(), Qp / Qp.sum()


def ex_prime_dual_curve(rhos, d, q_grid=None, grid_check: bool = False, return_bounds: bool = False):
    """``max_Q E'_x(Q, rho)`` on a grid of rho values; returns (values, argmax Qs).

    E'_x(Q, rho) is linear in Q and convex in Q', so the max-min equals
    ``-rho log max_{Q'} min_x (B Q')(x)`` with ``B = exp(-d/rho)``: a matrix
    game solved as a small LP.  The returned value is E'_x at the LP's
    optimal Q recomputed by Frank-Wolfe; ``return_bounds`` also returns the
    upper bound ``-rho log min_x (B Q')(x)`` at the LP's Q'.  The uniform
    distribution is preferred when it attains the maximum; ``grid_check``
    additionally scans the simplex grid and keeps a grid point whenever it
    is at least as good (ties then follow the grid tie-break).
    """
    dm = _as_distance(d)
    rhos = np.atleast_1d(np.asarray(rhos, dtype=float))
    if np.any(rhos < 1):
        raise ValueError("rho must be >= 1")
    X = dm.size
    Qs = np.empty((len(rhos), X))
    upper = np.empty(len(rhos))
    for k, rho in enumerate(rhos):
        B = dm.kernel(rho)
        _, Qs[k], Qp = _matrix_game(B)
        upper[k] = -rho * math.log(max(float((B @ Qp).min()), 1e-300))
    B = np.stack([dm.kernel(r) for r in rhos])
    values = np.maximum(solve_output_distribution(Qs, B, rhos)[0], 0.0)
    uniform = np.full((len(rhos), X), 1.0 / X)
    vu = np.maximum(solve_output_distribution(uniform, B, rhos)[0], 0.0)
    tie = vu >= values - 1e-12
    Qs[tie] = uniform[tie]
    values = np.where(tie, np.maximum(vu, values), values)
    if grid_check:
        pts = _q_points(X, q_grid)
        table = ex_prime_dual_table(pts, rhos, dm)
        for k in range(len(rhos)):
            j = pick_tied_max(table[k], pts)
            if table[k, j] >= values[k] - 1e-12:
                Qs[k] = pts[j]
                values[k] = max(values[k], table[k, j])
    upper = np.maximum(upper, values)
    return (values, Qs, upper) if return_bounds else (values, Qs)


def ex_prime_dual_max(rho, d, q_grid=None, grid_check: bool = True):
    """``(max_Q E'_x(Q, rho), argmax Q)``.

    Exact through the matrix-game LP, cross-checked against the exhaustive
    simplex grid; grid points win ties, so a flat maximum resolves toward
    the uniform distribution.
    """
    if rho < 1:
        raise ValueError(f"rho must be >= 1, got {rho}")
    vals, Qs = ex_prime_dual_curve([rho], d, q_grid, grid_check=grid_check)
    return float(vals[0]), Qs[0]


def ex_prime_zero_rate(d) -> tuple[float, np.ndarray]:
    """``max_Q min_xb sum_x Q(x) d(x, xb)`` and its maximizer.

    This is the rho -> inf limit of ``max_Q E'_x(Q, rho)`` and equals
    ``max_Q E'_ex(Q, 0)``.  Infinite distances are capped at a large finite
    value before the LP; the limit is ``inf`` when every column of ``d``
    holds an infinite entry (then the uniform Q is returned).
    """
    D = _as_distance(d).d
    X = D.shape[0]
    off = ~np.eye(X, dtype=bool)
    if np.all((np.isinf(D) & off).any(axis=0)):
        return math.inf, np.full(X, 1.0 / X)
    finite = D[np.isfinite(D)]
    cap = 1e3 * (1.0 + finite.max(initial=0.0))
    Dc = np.where(np.isinf(D), cap, D)
    _, _, Q = _matrix_game(Dc.T)
    uniform = np.full(X, 1.0 / X)
    vq, vu = zero_rate_limit(Q, D), zero_rate_limit(uniform, D)
    if vu >= vq - 1e-12:
        return max(vu, vq), uniform
    return vq, Q


# --------------------------------------------------------------------------
# sup over rho


def sup_over_rho(fn, R, rho_max=RHO_MAX, points=RHO_POINTS, limit=None, values=None, grid=None):
    """``sup_{1 <= rho <= rho_max} fn(rho) - rho R`` on a log grid plus golden refinement.

    ``fn`` evaluates a single rho; ``values`` may supply precomputed samples
    of ``fn`` on ``grid``.  The refinement assumes local unimodality only.
    """
    if grid is None:
        grid = np.geomspace(1.0, rho_max, points)
    if values is None:
        values = np.array([fn(r) for r in grid])
    obj = values - grid * R
    i = int(np.argmax(obj))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    x, fx = golden_max(lambda r: fn(r) - r * R, lo, hi, tol=1e-11 * hi)
    if obj[i] >= fx:
        x, fx = grid[i], obj[i]
    at_lower = i == 0 and x <= grid[0] * (1 + 1e-9)
    truncated = i == len(grid) - 1
    lim = None
    if truncated and limit is not None:
        lim = limit if R == 0 else -math.inf
    return Optimum(float(fx), float(x), at_lower=at_lower, truncated=truncated, limit=lim)


def eex_prime_from_dual(Q, R, d, rho_max=RHO_MAX, points=RHO_POINTS) -> Optimum:
    """E'_ex(Q, R) through ``sup_{rho >= 1} E'_x(Q, rho) - rho R``.

    The result flags a supremum on ``rho = 1`` (``at_lower``) and one pushed
    to ``rho_max`` (``truncated``); for ``R = 0`` the analytic limit
    ``zero_rate_limit(Q, d)`` is attached.
    """
    if R < 0:
        raise ValueError(f"rate must be non-negative, got {R}")
    Q = as_probs(Q)
    dm = _as_distance(d)
    grid = np.geomspace(1.0, rho_max, points)
    values = ex_prime_dual_table(Q[None], grid, dm)[:, 0]

    return sup_over_rho(WarmExPrime(Q, dm), R, rho_max, points, limit=zero_rate_limit(Q, dm), values=values, grid=grid)


class WarmExPrime:
    """``rho -> E'_x(Q, rho)`` for one composition, warm-starting each solve at the previous minimizer."""

    def __init__(self, Q, d):
        self.Q = as_probs(Q)
        self.d = _as_distance(d)
        self._last = self.Q[None].copy()

    def __call__(self, rho: float) -> float:
        vals, P, _ = solve_output_distribution(self.Q[None], self.d.kernel(rho), rho, start=self._last)
        self._last = P
        return max(float(vals[0]), 0.0)


# --------------------------------------------------------------------------
# primal programs over joint distributions


def _entropy_terms(P, ref):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(P > 0, P * np.log(P / ref), 0.0)


def _joint_objective(P, D):
    """``(E_P[d], I_P(X; Xb))`` of a joint matrix."""
    with np.errstate(invalid="ignore"):
        ed = float(np.where(P > 0, P * D, 0.0).sum())
    px = P.sum(axis=1, keepdims=True)
    py = P.sum(axis=0, keepdims=True)
    mi = float(_entropy_terms(P, px * py).sum())
    return ed, max(mi, 0.0)


def _weak_lagrangian_joint(Q, D, s, start, tol=1e-13, max_iter=2000):
    """Minimize ``E[d] + s I`` over joints with row marginal Q.

    The optimal test channel is ``V(xb|x) ∝ Q'(xb) exp(-d/s)`` for the
    output marginal ``Q'`` minimizing ``-s sum_x Q(x) log (K Q')(x)``.  That
    marginal is found by pairwise Frank-Wolfe and polished with
    Blahut-Arimoto updates until the suboptimality certificate
    ``s log max_xb r(xb)`` drops below ``tol``.
    """
    K = np.exp(-D / s)
    pos = Q > 0
    _, Qp, _ = solve_output_distribution(Q[None], K, s, tol=tol, max_iter=1000, start=start[None])
    Qp = Qp[0]
    for _ in range(max_iter):
        u = K @ Qp
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(pos, Q / u, 0.0)
        r = K.T @ w
        if s * math.log(max(r.max(), 1.0)) <= tol:
            break
        Qp = Qp * r
        Qp /= Qp.sum()
    u = K @ Qp
    with np.errstate(divide="ignore", invalid="ignore"):
        V = np.where(pos[:, None], K * Qp[None, :] / u[:, None], 0.0)
    return Q[:, None] * V, Qp


def _ckm_lagrangian_joint(Q, D, s, tol=1e-15, max_iter=100_000):
    """Minimize ``E[d] + s D(P || Q x Q)`` over couplings of (Q, Q) (Sinkhorn)."""
    pos = Q > 0
    q = Q[pos]
    K = np.exp(-D[np.ix_(pos, pos)] / s) * np.outer(q, q)
    a = np.sqrt(q / K.sum(axis=1))
    for _ in range(max_iter):
        a_new = np.sqrt(a * q / (K @ a))
        if np.max(np.abs(a_new - a) / a_new) <= tol:
            a = a_new
            break
        a = a_new
    Psub = a[:, None] * K * a[None, :]
    Psub = 0.5 * (Psub + Psub.T)
    P = np.zeros((Q.size, Q.size))
    P[np.ix_(pos, pos)] = Psub
    return P


def _constrained_by_multiplier(solve_at, R, D, s_max=1e12, iters=100):
    """Minimize ``E[d] + I - R`` subject to ``I <= R`` via the multiplier ``s``.

    ``solve_at(s)`` returns a joint minimizing ``E[d] + s I``.  ``I`` is
    non-increasing in ``s``; the final joint mixes the two bracketing
    solutions so that the constraint is met with equality.
    """
    P1 = solve_at(1.0)
    ed, mi = _joint_objective(P1, D)
    if mi <= R:
        return ed + mi - R, P1
    lo, P_lo = 1.0, P1
    hi = 2.0
    while True:
        P_hi = solve_at(hi)
        if _joint_objective(P_hi, D)[1] <= R or hi >= s_max:
            break
        lo, P_lo = hi, P_hi
        hi *= 8.0
    for _ in range(iters):
        mid = math.sqrt(lo * hi)
        P_mid = solve_at(mid)
        if _joint_objective(P_mid, D)[1] > R:
            lo, P_lo = mid, P_mid
        else:
            hi, P_hi = mid, P_mid
        if hi / lo - 1.0 < 1e-12:
            break
    a, b = 0.0, 1.0  # weight on P_lo; I(mix) <= R holds at 0
    for _ in range(100):
        m = 0.5 * (a + b)
        if _joint_objective(m * P_lo + (1 - m) * P_hi, D)[1] <= R:
            a = m
        else:
            b = m
    P = a * P_lo + (1 - a) * P_hi
    ed, mi = _joint_objective(P, D)
    return ed + mi - R, P


def eex_prime_primal(Q, R, d, return_joint: bool = False):
    """Weak expurgated exponent ``min_{P: P_X = Q, I <= R} E[d] + I - R``."""
    if R < 0:
        raise ValueError(f"rate must be non-negative, got {R}")
    Q = as_probs(Q)
    D = _as_distance(d).d
    if R == 0:
        value = zero_rate_limit(Q, D)
        if not return_joint:
            return value
        col = np.where(Q[:, None] > 0, Q[:, None] * D, 0.0).sum(axis=0)
        P = np.outer(Q, np.eye(Q.size)[int(np.argmin(col))])
        return value, P
    state = {"start": Q.copy()}

    def solve_at(s):
        P, Qp = _weak_lagrangian_joint(Q, D, s, state["start"])
        state["start"] = 0.5 * (Qp + Q)
        return P

    value, P = _constrained_by_multiplier(solve_at, R, D)
    return (value, P) if return_joint else value


def eex_ckm_primal(Q, R, d, return_joint: bool = False):
    """CKM expurgated exponent ``min_{P: P_X = P_Xb = Q, I <= R} E[d] + I - R``."""
    if R < 0:
        raise ValueError(f"rate must be non-negative, got {R}")
    Q = as_probs(Q)
    D = _as_distance(d).d
    if R == 0:
        P = np.outer(Q, Q)
        ed, _ = _joint_objective(P, D)
        return (ed, P) if return_joint else ed
    value, P = _constrained_by_multiplier(lambda s: _ckm_lagrangian_joint(Q, D, s), R, D)
    return (value, P) if return_joint else value


# --------------------------------------------------------------------------
# E_x(Q, rho): single-composition exponent with a tilt a(.)


def _tilt_objective(b, Q, K, rho):
    """Objective in ``b = a / rho`` and its gradient and Hessian, batched.

    f(b) = rho [Q.b - sum_x Q(x) log sum_xb K(x,xb) Q(xb) e^{b(xb)}]
    """
    M = K * Q[:, None, :]
    with np.errstate(over="ignore"):
        bmax = b.max(axis=1, keepdims=True)
        E = M * np.exp(b - bmax)[:, None, :]
    Z = E.sum(axis=2)
    pos = Q > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        logZ = np.where(pos, np.log(Z) + bmax, 0.0)
        pi = np.where(pos[:, :, None], E / Z[:, :, None], 0.0)
    f = rho * ((Q * b).sum(axis=1) - (Q * logZ).sum(axis=1))
    weighted = Q[:, :, None] * pi
    col = weighted.sum(axis=1)
    grad = rho[:, None] * (Q - col)
    hess = rho[:, None, None] * (np.einsum("nxy,nxz->nyz", weighted, pi) - col[:, :, None] * np.eye(Q.shape[1])[None])
    return f, grad, hess


def _ex_single_batch(Qs, K, rho, tol=1e-9, max_iter=500):
    """Damped Newton ascent on the tilt for a batch of input distributions.

    A member leaves the batch once its gradient is below ``tol``, once a
    step gains less than 1e-14 relative, or once backtracking finds no
    ascent.  The value test matters when infinite distances make the
    supremum approached only as the tilt diverges.
    """
    Qs = np.atleast_2d(np.asarray(Qs, dtype=float))
    N, X = Qs.shape
    K = np.broadcast_to(K, (N, X, X))
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (N,))
    b = np.zeros((N, X))
    f, g, H = _tilt_objective(b, Qs, K, rho)
    eye = np.eye(X)[None]
    null = Qs <= 0
    live = np.abs(g).max(axis=1) > tol
    for _ in range(max_iter):
        idx = np.flatnonzero(live)
        if idx.size == 0:
            break
        # gauge: the objective is invariant to b -> b + c; letters with Q = 0 are inert.
        # Infinite distances can split the letters into blocks with one gauge each,
        # so a small ridge keeps the system solvable.
        Hi = H[idx]
        ridge = 1e-10 * (1.0 + np.abs(Hi).max(axis=(1, 2)))
        A = -Hi + np.ones((X, X))[None] / X + eye * (null[idx][:, :, None] + ridge[:, None, None])
        step = np.linalg.solve(A, g[idx][:, :, None])[:, :, 0]
        step = np.where(null[idx], 0.0, step)
        slope = (g[idx] * step).sum(axis=1)
        f_old = f[idx]
        t = 1.0
        pend = idx
        pstep, pslope = step, slope
        for _ in range(60):
            cand = b[pend] + t * pstep
            fc, gc, Hc = _tilt_objective(cand, Qs[pend], K[pend], rho[pend])
            ok = (fc >= f[pend] + 1e-4 * t * pslope) & (fc > f[pend])
            acc = pend[ok]
            b[acc], f[acc], g[acc], H[acc] = cand[ok], fc[ok], gc[ok], Hc[ok]
            pend, pstep, pslope = pend[~ok], pstep[~ok], pslope[~ok]
            if pend.size == 0:
                break
            t *= 0.5
        gain = f[idx] - f_old
        live[idx] = (gain > 1e-14 * (1.0 + np.abs(f_old))) & (np.abs(g[idx]).max(axis=1) > tol)
        live[pend] = False
    a = rho[:, None] * b
    a = a - (Qs * a).sum(axis=1, keepdims=True)
    a = np.where(null, 0.0, a)
    return f, a


def ex_single_dual(Q, rho, d, return_tilt: bool = False):
    """E_x(Q, rho) = sup_a -rho sum_x Q(x) log sum_xb Q(xb) (e^{-d} e^{a(xb)-a(x)})^{1/rho}."""
    if rho < 1:
        raise ValueError(f"rho must be >= 1, got {rho}")
    Q = as_probs(Q)
    dm = _as_distance(d)
    f, a = _ex_single_batch(Q[None], dm.kernel(rho), rho)
    value = max(float(f[0]), 0.0)
    return (value, TiltVector(a[0], Q)) if return_tilt else value


def ex_single_table(Qs, rhos, d):
    Qs = np.atleast_2d(np.asarray(Qs, dtype=float))
    dm = _as_distance(d)
    out = np.empty((len(rhos), len(Qs)))
    for k, rho in enumerate(rhos):
        f, _ = _ex_single_batch(Qs, dm.kernel(rho), rho)
        out[k] = np.maximum(f, 0.0)
    return out


def ex_single_dual_curve(rhos, d, q_grid=None, polish: bool = True):
    """``max_Q E_x(Q, rho)`` on a grid of rho values; returns (values, argmax Qs)."""
    dm = _as_distance(d)
    rhos = np.atleast_1d(np.asarray(rhos, dtype=float))
    if np.any(rhos < 1):
        raise ValueError("rho must be >= 1")

    def eval_fn(Qb, rh):
        K = np.stack([dm.kernel(r) for r in rh])
        f, _ = _ex_single_batch(Qb, K, rh)
        return np.maximum(f, 0.0)

    # E_x(Q, rho) >= E'_x(Q, rho) for every Q, so the E'_x maximizers are natural seeds
    _, seeds = ex_prime_dual_curve(rhos, dm)
    return _max_over_q(lambda pts, rh: ex_single_table(pts, rh, dm), eval_fn, rhos, dm.size, q_grid, polish, seeds)


def ex_single_dual_max(rho, d, q_grid=None, polish: bool = True):
    if rho < 1:
        raise ValueError(f"rho must be >= 1, got {rho}")
    vals, Qs = ex_single_dual_curve([rho], d, q_grid, polish)
    return float(vals[0]), Qs[0]

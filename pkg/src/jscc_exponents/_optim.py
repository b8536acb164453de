"""Small numerical helpers shared by the exponent modules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .prob import _compositions

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Optimum:
    """Result of a one-dimensional sup/inf over a truncated parameter range.

    ``at_lower``/``truncated`` flag optima that sit on the lower end or on the
    artificial upper end of the searched interval.  ``limit`` carries the
    analytic value at infinity when one is known.
    """

    value: float
    arg: float
    at_lower: bool = False
    truncated: bool = False
    limit: float | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __float__(self):
        return float(self.value)

    @property
    def flagged(self) -> bool:
        return self.at_lower or self.truncated


def golden_max(f, a: float, b: float, tol: float = 1e-12, max_iter: int = 200):
    """Maximize a unimodal scalar function on ``[a, b]``; returns ``(x, f(x))``."""
    if b < a:
        a, b = b, a
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol * (1.0 + abs(a) + abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    best = [(fc, c), (fd, d)]
    fa, fb = f(a), f(b)
    best += [(fa, a), (fb, b)]
    fx, x = max(best, key=lambda p: p[0])
    return x, fx


def golden_max_batch(f, a, b, iters: int = 60):
    """Vectorized golden-section search; ``f`` maps an array of points to values."""
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        left = fc >= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - INV_PHI * (b - a)
        new_d = a + INV_PHI * (b - a)
        c_next = np.where(left, new_c, d)
        d_next = np.where(left, c, new_d)
        probe = np.where(left, new_c, new_d)
        fp = f(probe)
        fc_next = np.where(left, fp, fd)
        fd_next = np.where(left, fc, fp)
        c, d, fc, fd = c_next, d_next, fc_next, fd_next
    x = np.where(fc >= fd, c, d)
    return x, np.maximum(fc, fd)


def simplex_grid(size: int, resolution: float) -> np.ndarray:
    """All simplex points whose coordinates are multiples of ``resolution``.

    Ordered like source types: first coordinate descending, so index 0 is the
    point mass on the first letter.
    """
    steps = int(round(1.0 / resolution))
    if steps < 1 or abs(steps * resolution - 1.0) > 1e-9:
        raise ValueError(f"resolution {resolution} does not divide 1")
    return np.array(list(_compositions(steps, size)), dtype=float) / steps


def pick_tied_max(values, points, tie_tol: float = 1e-12) -> int:
    """Index of the maximum, ties resolved toward the uniform point then the lowest index."""
    values = np.asarray(values)
    top = np.nanmax(values)
    cand = np.flatnonzero(values >= top - tie_tol)
    if len(cand) == 1:
        return int(cand[0])
    size = points.shape[1]
    dist = np.sum((points[cand] - 1.0 / size) ** 2, axis=1)
    return int(cand[np.argmin(dist)])

"""Sampled exponent curves, their upper concave hulls and numerical biconjugates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._optim import golden_max


@dataclass(frozen=True)
class ExponentCurve:
    """An extended-real function sampled on a strictly increasing grid.

    ``args`` optionally carries the maximizing distribution behind each
    sample (one row per grid point) and ``boundary_flags`` marks samples whose
    value came from a truncated or boundary-attained optimization.
    """

    grid: np.ndarray
    values: np.ndarray
    boundary_flags: np.ndarray | None = None
    args: np.ndarray | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape:
            raise ValueError("grid and values must be 1-D arrays of equal length")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        flags = self.boundary_flags
        flags = np.zeros(grid.size, dtype=bool) if flags is None else np.asarray(flags, dtype=bool)
        if flags.shape != grid.shape:
            raise ValueError("boundary_flags must match the grid")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "boundary_flags", flags)

    def __len__(self):
        return self.grid.size

    @property
    def finite(self) -> np.ndarray:
        return np.isfinite(self.values)

    def __call__(self, x):
        """Piecewise-linear interpolation on the finite samples."""
        m = self.finite
        return np.interp(x, self.grid[m], self.values[m])

    def slopes(self) -> np.ndarray:
        m = self.finite
        return np.diff(self.values[m]) / np.diff(self.grid[m])

    def cell_width(self, x: float) -> float:
        """Width of the larger grid cell adjacent to ``x``."""
        i = int(np.clip(np.searchsorted(self.grid, x), 1, self.grid.size - 1))
        left = self.grid[i] - self.grid[i - 1]
        right = self.grid[min(i + 1, self.grid.size - 1)] - self.grid[i]
        return float(max(left, right))

    def resolution_bound(self, x: float, cells: int = 2) -> float:
        """``cells`` grid cells around ``x`` converted to value units by the steepest slope."""
        s = self.slopes()
        steep = float(np.abs(s).max()) if s.size else 0.0
        return cells * self.cell_width(x) * steep


def hull_vertices(curve: ExponentCurve) -> np.ndarray:
    """Grid indices of the vertices of the upper concave envelope (monotone chain)."""
    idx = np.flatnonzero(curve.finite)
    if idx.size < 2:
        raise ValueError("hull needs at least two finite points")
    x, y = curve.grid, curve.values
    chain: list[int] = []
    for i in idx:
        while len(chain) >= 2:
            i1, i2 = chain[-2], chain[-1]
            cross = (x[i2] - x[i1]) * (y[i] - y[i1]) - (y[i2] - y[i1]) * (x[i] - x[i1])
            if cross >= 0:
                chain.pop()
            else:
                break
        chain.append(int(i))
    return np.array(chain)


def upper_concave_hull(curve: ExponentCurve) -> ExponentCurve:
    """Smallest concave majorant of the samples, read back onto the same grid.

    The result's ``meta['vertices']`` lists the grid indices of hull vertices;
    ``args`` and flags are kept at vertices and cleared on chords.
    """
    v = hull_vertices(curve)
    values = np.interp(curve.grid, curve.grid[v], curve.values[v])
    on_vertex = np.zeros(curve.grid.size, dtype=bool)
    on_vertex[v] = True
    values[on_vertex] = curve.values[on_vertex]
    # points outside the finite span keep their own values
    outside = (curve.grid < curve.grid[v[0]]) | (curve.grid > curve.grid[v[-1]])
    values[outside] = curve.values[outside]
    return ExponentCurve(
        curve.grid,
        values,
        curve.boundary_flags & on_vertex,
        curve.args,
        meta={**curve.meta, "vertices": v},
    )


def supporting_vertices(curve: ExponentCurve, x: float) -> tuple[int, int]:
    """Grid indices of the two hull vertices bracketing ``x``.

    Returns the same index twice when ``x`` sits on a vertex.
    """
    v = hull_vertices(curve)
    g = curve.grid[v]
    j = int(np.searchsorted(g, x))
    if j < v.size and np.isclose(g[j], x, rtol=1e-12, atol=0.0):
        return int(v[j]), int(v[j])
    if j == 0:
        return int(v[0]), int(v[0])
    if j == v.size:
        return int(v[-1]), int(v[-1])
    return int(v[j - 1]), int(v[j])


def _inner_sup(x, y, lam, R):
    """``sup_j y_j + (lam - x_j) R`` for each entry of ``R``."""
    R = np.atleast_1d(R)
    return (y[None, :] + (lam - x[None, :]) * R[:, None]).max(axis=1)


def biconjugate_eval(curve: ExponentCurve, lam: float, r_points: int = 2001) -> float:
    """``inf_R sup_rho { g(rho) + (lam - rho) R }`` on the sampled curve.

    The inner supremum runs over the finite samples; the outer infimum is
    scanned on ``r_points`` slopes in ``[-s, s]`` (``s`` the steepest sample
    slope, padded) and refined by golden section, which is valid because the
    inner supremum is convex in ``R``.
    """
    m = curve.finite
    x, y = curve.grid[m], curve.values[m]
    if x.size < 2:
        raise ValueError("biconjugate needs at least two finite points")
    if not x[0] - 1e-12 <= lam <= x[-1] + 1e-12:
        raise ValueError(f"lambda={lam} outside the grid span [{x[0]}, {x[-1]}]")
    s = float(np.abs(np.diff(y) / np.diff(x)).max())
    s = 1.01 * s + 1e-12
    R = np.linspace(-s, s, r_points)
    h = _inner_sup(x, y, lam, R)
    i = int(np.argmin(h))
    lo, hi = R[max(i - 1, 0)], R[min(i + 1, R.size - 1)]
    _, neg = golden_max(lambda r: -float(_inner_sup(x, y, lam, r)[0]), lo, hi, tol=1e-15)
    return float(min(h[i], -neg))

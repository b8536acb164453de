"""Class-based partitions of source types.

Every source type is sent with the composition of the class it belongs
to.  A class carries ``(Q, rho, lambda)`` and a type with rate ``R`` scores

    E'_x(Q, rho) + (lambda - rho) R - t E_s(lambda)

against it; types go to their best-scoring class.  The score is affine in
``R``, so two classes split the types at a single rate threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ex_prime_dual, ex_prime_dual_max
from .joint import (
    _scenario,
    channel_max_curve,
    csiszar_dual_exponent,
    per_type_exponent_table,
    rho_grid,
)
from .prob import SourceTypeTable, as_probs, enumerate_types, log_multinomial
from .sim import quantize_composition
from .source import gallager_source_fn


@dataclass(frozen=True)
class ClassParams:
    """Composition and multipliers ``(Q_c, rho_c, lambda_c)`` of one class."""

    Q: np.ndarray
    rho: float
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "Q", as_probs(self.Q).copy())
        if not self.rho >= 1:
            raise ValueError(f"rho must be >= 1, got {self.rho}")
        if not self.lam >= 1:
            raise ValueError(f"lambda must be >= 1, got {self.lam}")

    @property
    def slope(self) -> float:
        return self.lam - self.rho

    def same_as(self, other: ClassParams) -> bool:
        return np.array_equal(self.Q, other.Q) and self.rho == other.rho and self.lam == other.lam


@dataclass(frozen=True)
class PartitionPlan:
    """Assignment of every k-type to one of ``classes``."""

    classes: tuple
    assignment: np.ndarray
    types: SourceTypeTable
    t: float
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        assignment = np.asarray(self.assignment, dtype=int)
        if assignment.shape != (len(self.types),):
            raise ValueError("every source type needs exactly one class")
        if assignment.size and (assignment.min() < 0 or assignment.max() >= len(self.classes)):
            raise ValueError("assignment refers to a missing class")
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "assignment", assignment)

    @property
    def k(self) -> int:
        return self.types.k

    @property
    def n(self) -> int | None:
        """Channel blocklength ``k / t`` when it is an integer."""
        n = self.k / self.t
        return int(round(n)) if abs(n - round(n)) < 1e-9 else None

    def members(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == c)

    def class_sizes(self) -> np.ndarray:
        """Log of the number of source sequences in each class (``-inf`` when empty)."""
        out = np.full(len(self.classes), -math.inf)
        for c in range(len(self.classes)):
            idx = self.members(c)
            if idx.size:
                lc = self.types.log_counts[idx]
                out[c] = float(lc.max() + np.log(np.exp(lc - lc.max()).sum()))
        return out


def class_scores(classes, rates, t, P_V, d) -> np.ndarray:
    """Score matrix ``(m, N)`` of every class against every rate."""
    p = as_probs(P_V)
    rates = np.asarray(rates, dtype=float)
    cache = {}
    rows = []
    for c in classes:
        key = (c.Q.tobytes(), c.rho)
        if key not in cache:
            cache[key] = ex_prime_dual(c.Q, c.rho, d)
        rows.append(cache[key] + c.slope * rates - t * gallager_source_fn(c.lam, p))
    return np.array(rows)


def assign_classes(types: SourceTypeTable, classes, t, P_V, d, meta=None) -> PartitionPlan:
    """Send each type to its best-scoring class; ties go to the lowest index."""
    if len(classes) == 0:
        raise ValueError("at least one class is needed")
    scores = class_scores(classes, types.rates, t, P_V, d)
    return PartitionPlan(tuple(classes), np.argmax(scores, axis=0), types, t, meta=dict(meta or {}))


def two_class_threshold(c1: ClassParams, c2: ClassParams, t, P_V, d) -> float:
    """Rate ``R0`` at which the scores of two classes cross.

    With ``(lambda_2 - rho_2) > (lambda_1 - rho_1)`` the types with
    ``R_i <= R0`` prefer class 1; with the opposite sign those with
    ``R_i >= R0`` do.  ``R0`` may be negative, leaving one class empty.
    """
    den = c2.slope - c1.slope
    if den == 0:
        raise ValueError("equal slopes: the assignment does not depend on the rate")
    p = as_probs(P_V)
    num = (
        ex_prime_dual(c1.Q, c1.rho, d)
        - ex_prime_dual(c2.Q, c2.rho, d)
        + t * (gallager_source_fn(c2.lam, p) - gallager_source_fn(c1.lam, p))
    )
    return num / den


def threshold_assignment(rates, R0: float, c1: ClassParams, c2: ClassParams) -> np.ndarray:
    """Class indices (0 or 1) predicted by the threshold rule."""
    rates = np.asarray(rates, dtype=float)
    first = rates <= R0 if c2.slope > c1.slope else rates >= R0
    return np.where(first, 0, 1)


def build_two_class_plan(t, P_V, W, k: int, rhos=None, q_grid=None, curve=None, primal: bool = True):
    """Two-class partition attaining the hull-based dual exponent.

    The optimal ``lambda_0`` of ``hull(lambda) - t E_s(lambda)`` lies where
    the hull follows the curve or inside a chord whose ends
    ``lambda_lo < lambda_hi`` touch the curve.
    Class 1 uses the maximizer at ``lambda_hi`` with ``rho = lambda_hi``,
    class 2 the one at ``lambda_lo`` with ``rho = lambda_lo``, and both use
    ``lambda = lambda_0``: their scores are then the two ends of the
    supporting chord and cross at its slope.  When both ends coincide the
    plan degenerates to one effective class.

    Returns ``(plan, exponent)``; the per-type table and the dual optimum are
    kept in ``plan.meta``.
    """
    sc = _scenario(t, P_V, W)
    rhos = rho_grid() if rhos is None else np.asarray(rhos, dtype=float)
    if curve is None:
        curve = channel_max_curve(sc.d, rhos, q_grid)
    if np.isfinite(curve.values).sum() < 2:
        raise ValueError("hull is degenerate: fewer than two finite samples")
    dual = csiszar_dual_exponent(sc.t, sc.source, sc.channel, curve=curve)
    lam0 = max(dual.arg, 1.0)
    edge = dual.meta.get("edge")
    if edge is not None:
        lo, _, hi, _ = edge
        Q_lo = ex_prime_dual_max(lo, sc.d, grid_check=False)[1]
        Q_hi = ex_prime_dual_max(hi, sc.d, grid_check=False)[1]
    else:
        lo = hi = lam0
        Q_lo = Q_hi = ex_prime_dual_max(lam0, sc.d, grid_check=False)[1]
    if np.allclose(Q_lo, Q_hi, atol=1e-9):
        c = ClassParams(Q_hi, lam0, lam0)
        classes = (c, c)
    else:
        classes = (ClassParams(Q_hi, hi, lam0), ClassParams(Q_lo, lo, lam0))
    types = enumerate_types(k, sc.source.size, sc.t)
    meta = {
        "lambda0": lam0,
        "support": (float(lo), float(hi)),
        "dual": dual,
        "single_class": classes[0].same_as(classes[1]),
    }
    if not meta["single_class"]:
        meta["threshold"] = two_class_threshold(classes[0], classes[1], sc.t, sc.source, sc.d)
    plan = assign_classes(types, classes, sc.t, sc.source, sc.d, meta)
    table = per_type_exponent_table(sc.t, sc.source, sc.channel, plan, rhos, primal=primal)
    plan.meta["table"] = table
    return plan, table.overall


def build_type_plan(t, P_V, W, k: int, rhos=None, q_grid=None, curve=None, primal: bool = True):
    """One class per source type, each with the composition maximizing ``E'_ex(., R_i)``.

    This is the full ``N_k``-class construction.  Class ``i`` takes the
    maximizer of ``E'_x(., rho)`` at the rho attaining
    ``sup_rho max_Q E'_x(Q, rho) - rho R_i``.  Returns ``(plan, exponent)``.
    """
    sc = _scenario(t, P_V, W)
    rhos = rho_grid() if rhos is None else np.asarray(rhos, dtype=float)
    if curve is None:
        curve = channel_max_curve(sc.d, rhos, q_grid)
    types = enumerate_types(k, sc.source.size, sc.t)
    classes = []
    for R in types.rates:
        i = int(np.argmax(curve.values - curve.grid * R))
        classes.append(ClassParams(curve.args[i], curve.grid[i], max(curve.grid[i], 1.0)))
    plan = PartitionPlan(tuple(classes), np.arange(len(types)), types, sc.t)
    table = per_type_exponent_table(sc.t, sc.source, sc.channel, plan, rhos, primal=primal)
    plan.meta["table"] = table
    return plan, table.overall


@dataclass(frozen=True)
class FeasibilityReport:
    """Per-class comparison of ``log |A_c|`` with ``log |T^n(Q_c)|``."""

    n: int
    log_class_sizes: np.ndarray
    log_codeword_counts: np.ndarray
    compositions: np.ndarray

    @property
    def margins(self) -> np.ndarray:
        return self.log_codeword_counts - self.log_class_sizes

    @property
    def passes(self) -> np.ndarray:
        return self.margins >= -1e-12

    @property
    def feasible(self) -> bool:
        return bool(self.passes.all())


def check_feasibility(plan: PartitionPlan, n: int) -> FeasibilityReport:
    """Can every class be given distinct codewords from the type class of its quantized composition?"""
    if n < 1:
        raise ValueError("n must be positive")
    sizes = plan.class_sizes()
    counts = np.array([quantize_composition(c.Q, n) for c in plan.classes])
    logs = np.array([log_multinomial(row) for row in counts])
    return FeasibilityReport(n, sizes, logs, counts)

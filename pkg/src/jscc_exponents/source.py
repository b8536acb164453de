"""Source reliability function and Gallager's source function.

``e(R, P)`` is computed two ways: directly on the tilted family
``Q_s ∝ P**s`` (primal) and as ``sup_{rho>=0} rho*R - E_s(rho, P)`` (dual).
Letters with zero probability are dropped before either computation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ._optim import Optimum, golden_max
from .prob import Distribution, SourceTypeTable, as_probs, entropy, kl_divergence

RHO_MAX = 1e4
BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class SourceModel:
    """A memoryless source transmitted at ``t`` source symbols per channel use."""

    law: Distribution
    t: float

    def __post_init__(self):
        if not isinstance(self.law, Distribution):
            object.__setattr__(self, "law", Distribution(self.law))
        if not self.t > 0:
            raise ValueError(f"transmission rate must be positive, got {self.t}")

    @property
    def support_law(self) -> np.ndarray:
        p = self.law.probs
        return p[p > 0]


def _support(p) -> np.ndarray:
    p = as_probs(p)
    return p[p > 0]


def _tilted(p: np.ndarray, s: float) -> np.ndarray:
    logq = s * np.log(p)
    q = np.exp(logq - logq.max())
    return q / q.sum()


def _lse(a: np.ndarray) -> float:
    m = a.max()
    return float(m + math.log(np.exp(a - m).sum()))


def gallager_source_fn(rho, p) -> float:
    """``E_s(rho, P) = (1+rho) log sum_v P(v)**(1/(1+rho))``."""
    if rho < 0:
        raise ValueError(f"rho must be non-negative, got {rho}")
    p = _support(p)
    return (1.0 + rho) * _lse(np.log(p) / (1.0 + rho))


def gallager_source_slope(rho, p) -> float:
    """Derivative of ``E_s`` in rho; equals the entropy of the tilted law."""
    p = _support(p)
    return entropy(_tilted(p, 1.0 / (1.0 + rho)))


def source_reliability_primal(R: float, p) -> float:
    """``min_{Q: H(Q) >= R} D(Q || P)`` solved on the tilted family."""
    if R < 0:
        raise ValueError(f"rate must be non-negative, got {R}")
    p = _support(p)
    log_size = math.log(p.size)
    if R <= entropy(p):
        return 0.0
    if R > log_size + BOUNDARY_TOL:
        return math.inf
    uniform = np.full(p.size, 1.0 / p.size)
    if R >= log_size - BOUNDARY_TOL:
        return kl_divergence(uniform, p)
    # H(Q_s) decreases from log|V| at s=0 to H(P) at s=1
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        h = entropy(_tilted(p, mid))
        if h >= R:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-16:
            break
    return kl_divergence(_tilted(p, lo), p)


def source_reliability_dual_opt(R: float, p, rho_max: float = RHO_MAX, points: int = 200) -> Optimum:
    """``sup_{rho>=0} rho*R - E_s(rho, P)`` with the maximizing rho.

    The objective is concave in rho.  When the sampled maximum sits at
    ``rho_max`` the slope there decides between an infinite supremum
    (``R > log|V|``) and the analytic limit ``D(uniform || P)``.
    """
    if R < 0:
        raise ValueError(f"rate must be non-negative, got {R}")
    p = _support(p)
    log_size = math.log(p.size)
    logp = np.log(p)

    def objective(rho):
        return rho * R - (1.0 + rho) * _lse(logp / (1.0 + rho))

    grid = np.concatenate(([0.0], np.geomspace(1e-4, rho_max, points)))
    values = grid * R - (1.0 + grid) * logsumexp(logp[None, :] / (1.0 + grid[:, None]), axis=1)
    i = int(np.argmax(values))
    if i == len(grid) - 1 and R - gallager_source_slope(rho_max, p) > 0:
        if R > log_size + BOUNDARY_TOL:
            return Optimum(math.inf, math.inf, truncated=True, limit=math.inf)
        limit = -log_size - float(np.mean(logp))
        return Optimum(limit, math.inf, truncated=True, limit=limit)
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    x, fx = golden_max(objective, lo, hi, tol=1e-12)
    if values[i] > fx:
        x, fx = grid[i], values[i]
    return Optimum(max(float(fx), 0.0), float(x), at_lower=(x == 0.0))


def source_reliability_dual(R: float, p, rho_max: float = RHO_MAX) -> float:
    return source_reliability_dual_opt(R, p, rho_max).value


def class_source_fn(rho: float, class_types: SourceTypeTable, p) -> float:
    """``(1+rho) log sum_{v in class} P^k(v)**(1/(1+rho))`` by type enumeration."""
    if rho < 0:
        raise ValueError(f"rho must be non-negative, got {rho}")
    if len(class_types) == 0:
        raise ValueError("class has no source types")
    p = as_probs(p)
    if p.size != class_types.alphabet_size:
        raise ValueError("alphabet size mismatch between types and source")
    with np.errstate(divide="ignore"):
        logp = np.log(p)
    counts = class_types.counts
    # 0 * log 0 contributes nothing; a positive count on a null letter kills the type
    with np.errstate(invalid="ignore"):
        per_letter = np.where(counts > 0, counts * logp, 0.0)
    log_seq_prob = per_letter.sum(axis=1)
    terms = class_types.log_counts + log_seq_prob / (1.0 + rho)
    return float((1.0 + rho) * logsumexp(terms))

"""Finite-alphabet probability primitives and method-of-types counting.

All logarithms are natural (nats).  Distributions are validated on
construction and never silently renormalized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

STOCHASTIC_TOL = 1e-12
MAX_TYPES = 10**6


class ValidationError(ValueError):
    """Raised when a probability object fails validation."""


def _check_vector(p, name="distribution"):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValidationError(f"{name} must be a non-empty vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValidationError(f"{name} has negative or non-finite entries: {p}")
    total = p.sum()
    if abs(total - 1.0) > STOCHASTIC_TOL:
        raise ValidationError(f"{name} sums to {total!r}, not 1 (tolerance {STOCHASTIC_TOL})")
    return p


@dataclass(frozen=True)
class Distribution:
    """Probability vector on a finite alphabet."""

    probs: np.ndarray

    def __post_init__(self):
        p = _check_vector(self.probs).copy()
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def alphabet_size(self) -> int:
        return self.probs.size

    def __array__(self, dtype=None, copy=None):
        return self.probs if dtype is None else self.probs.astype(dtype)

    def __len__(self):
        return self.probs.size

    @classmethod
    def uniform(cls, size: int) -> Distribution:
        return cls(np.full(size, 1.0 / size))

    @classmethod
    def point_mass(cls, size: int, index: int) -> Distribution:
        p = np.zeros(size)
        p[index] = 1.0
        return cls(p)


@dataclass(frozen=True)
class JointDistribution:
    """Joint law P(x, xbar) on a finite product alphabet."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 2 or p.size == 0:
            raise ValidationError(f"joint distribution must be a non-empty matrix, got {p.shape}")
        _check_vector(p.ravel(), "joint distribution")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def dims(self) -> tuple[int, int]:
        return self.probs.shape

    def row_marginal(self) -> Distribution:
        return Distribution(self.probs.sum(axis=1))

    def col_marginal(self) -> Distribution:
        return Distribution(self.probs.sum(axis=0))

    def __array__(self, dtype=None, copy=None):
        return self.probs if dtype is None else self.probs.astype(dtype)


@dataclass(frozen=True)
class Channel:
    """Discrete memoryless channel with transition matrix ``rows[x, y] = W(y|x)``."""

    rows: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.rows, dtype=float)
        if w.ndim != 2 or w.size == 0:
            raise ValidationError(f"channel must be a non-empty matrix, got shape {w.shape}")
        for x, row in enumerate(w):
            try:
                _check_vector(row, f"channel row {x}")
            except ValidationError as exc:
                raise ValidationError(f"row {x}: {exc}") from None
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "rows", w)

    @property
    def input_size(self) -> int:
        return self.rows.shape[0]

    @property
    def output_size(self) -> int:
        return self.rows.shape[1]

    def __array__(self, dtype=None, copy=None):
        return self.rows if dtype is None else self.rows.astype(dtype)

    @classmethod
    def bsc(cls, p: float) -> Channel:
        return cls([[1 - p, p], [p, 1 - p]])


def as_probs(p) -> np.ndarray:
    """Return ``p`` as a validated probability vector."""
    if isinstance(p, Distribution):
        return p.probs
    return _check_vector(p)


def as_channel(w) -> np.ndarray:
    if isinstance(w, Channel):
        return w.rows
    return Channel(w).rows


@dataclass(frozen=True)
class SourceTypeTable:
    """All k-types of a source alphabet with exact log class sizes and rates."""

    k: int
    t: float
    counts: np.ndarray  # (N_k, |V|) integer compositions of k
    log_counts: np.ndarray  # log |T^k(P_i)|
    rates: np.ndarray  # R_i = t H(P_i)
    types: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "types", self.counts / self.k)

    def __len__(self):
        return len(self.counts)

    def __iter__(self):
        for i in range(len(self)):
            yield self.types[i], self.log_counts[i], self.rates[i]

    @property
    def alphabet_size(self) -> int:
        return self.counts.shape[1]

    def subset(self, indices) -> SourceTypeTable:
        idx = np.asarray(indices, dtype=int)
        return SourceTypeTable(self.k, self.t, self.counts[idx], self.log_counts[idx], self.rates[idx])


def entropy(p) -> float:
    p = as_probs(p)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


def kl_divergence(q, p) -> float:
    """D(q || p) in nats; ``inf`` when q is not absolutely continuous w.r.t. p."""
    q = as_probs(q)
    p = as_probs(p)
    if q.shape != p.shape:
        raise ValueError(f"dimension mismatch: {q.shape} vs {p.shape}")
    mask = q > 0
    if np.any(p[mask] == 0):
        return math.inf
    return float(max(0.0, np.sum(q[mask] * np.log(q[mask] / p[mask]))))


def mutual_information(joint) -> float:
    j = np.asarray(joint.probs if isinstance(joint, JointDistribution) else JointDistribution(joint).probs)
    px = j.sum(axis=1, keepdims=True)
    py = j.sum(axis=0, keepdims=True)
    mask = j > 0
    prod = (px * py)[mask]
    return float(max(0.0, np.sum(j[mask] * np.log(j[mask] / prod))))


def _compositions(k: int, parts: int):
    """Compositions of ``k`` into ``parts`` non-negative parts, first part descending."""
    if parts == 1:
        yield (k,)
        return
    for first in range(k, -1, -1):
        for rest in _compositions(k - first, parts - 1):
            yield (first,) + rest


def num_types(k: int, alphabet_size: int) -> int:
    return math.comb(k + alphabet_size - 1, alphabet_size - 1)


def log_multinomial(counts) -> float:
    counts = np.asarray(counts)
    n = counts.sum()
    return float(gammaln(n + 1) - np.sum(gammaln(counts + 1)))


def enumerate_types(k: int, alphabet_size: int, t: float = 1.0) -> SourceTypeTable:
    """Enumerate every k-type on an alphabet of the given size.

    Types are ordered with the first coordinate descending, so for a binary
    alphabet the first entry is the all-zeros composition.
    """
    if k < 1 or alphabet_size < 1:
        raise ValueError("k and alphabet_size must be positive")
    if t <= 0:
        raise ValueError("transmission rate t must be positive")
    total = num_types(k, alphabet_size)
    if total > MAX_TYPES:
        raise OverflowError(f"{total} types exceeds the enumeration cap {MAX_TYPES}")
    counts = np.array(list(_compositions(k, alphabet_size)), dtype=np.int64)
    log_counts = gammaln(k + 1) - gammaln(counts + 1).sum(axis=1)
    p = counts / k
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.where(p > 0, p * np.log(p), 0.0).sum(axis=1)
    return SourceTypeTable(k, float(t), counts, log_counts, t * h)


def log_type_class_size(p, k: int) -> float:
    """Exact log of the number of length-k sequences with type ``p``."""
    p = as_probs(p)
    counts = p * k
    rounded = np.rint(counts)
    if np.any(np.abs(counts - rounded) > 1e-9):
        raise ValueError(f"{p} is not a {k}-type")
    return log_multinomial(rounded.astype(np.int64))

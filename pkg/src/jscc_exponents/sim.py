"""Monte Carlo validation of class-based constant-composition codes.

Messages are all ``|V|^k`` source sequences, indexed lexicographically
(most significant symbol first).  Each message gets a codeword drawn
uniformly from the type class of its class composition, and the decoder
maximizes the channel likelihood penalized by the divergence of the
message's empirical distribution from the source law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .prob import as_channel, as_probs, kl_divergence

MAX_MESSAGES = 10**6
MAX_EXACT_OUTPUTS = 10**6
SOURCE_WEIGHT = -2.0
CHUNK = 1 << 22  # entries of the (outputs x messages) score block


def quantize_composition(Q, n: int) -> np.ndarray:
    """Largest-remainder rounding of ``n Q`` to integer counts summing to ``n``.

    Remainder ties go to the lower index.
    """
    if n < 1:
        raise ValueError("n must be positive")
    q = as_probs(Q)
    raw = n * q
    counts = np.floor(raw + 1e-12).astype(np.int64)
    rem = raw - counts
    short = n - int(counts.sum())
    # stable sort on -remainder keeps index order among equal remainders
    order = np.argsort(-np.round(rem, 12), kind="stable")
    counts[order[:short]] += 1
    return counts


def message_table(k: int, size: int) -> np.ndarray:
    """All length-k sequences over ``range(size)`` in lexicographic order."""
    if size**k > MAX_MESSAGES:
        raise OverflowError(f"{size}^{k} messages exceeds the cap {MAX_MESSAGES}")
    idx = np.arange(size**k)
    powers = size ** np.arange(k - 1, -1, -1)
    return (idx[:, None] // powers[None, :]) % size


def message_types(messages: np.ndarray, types) -> np.ndarray:
    """Type index (row of ``types.counts``) of every message."""
    size = types.alphabet_size
    counts = np.stack([(messages == a).sum(axis=1) for a in range(size)], axis=1)
    lookup = {tuple(row): i for i, row in enumerate(types.counts.tolist())}
    return np.array([lookup[tuple(row)] for row in counts.tolist()])


def _generator(*words) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(w) for w in words])))


@dataclass(frozen=True)
class Codebook:
    """One codeword per source sequence; ``entries[m]`` encodes message ``m``."""

    entries: np.ndarray
    plan: object
    seed: tuple
    messages: np.ndarray
    message_type: np.ndarray
    compositions: np.ndarray  # quantized counts per class

    @property
    def n(self) -> int:
        return self.entries.shape[1]

    @property
    def k(self) -> int:
        return self.messages.shape[1]

    def message_class(self) -> np.ndarray:
        return np.asarray(self.plan.assignment)[self.message_type]


def sample_codebook(plan, n: int, seed, check: bool = True) -> Codebook:
    """Draw every codeword as a uniform permutation of its class's quantized composition.

    ``seed`` is an integer or a tuple of integers feeding a Philox stream;
    the permutations come from argsorting one row of uniform keys per message.
    """
    from .partition import check_feasibility

    if check:
        report = check_feasibility(plan, n)
        if not report.feasible:
            bad = np.flatnonzero(~report.passes).tolist()
            raise ValueError(f"plan is infeasible at n={n}: classes {bad} exceed their type classes")
    seed = tuple(np.atleast_1d(seed).tolist())
    messages = message_table(plan.k, plan.types.alphabet_size)
    mtype = message_types(messages, plan.types)
    comps = np.array([quantize_composition(c.Q, n) for c in plan.classes])
    base = np.array([np.repeat(np.arange(comps.shape[1]), row) for row in comps])
    cls = np.asarray(plan.assignment)[mtype]
    keys = _generator(*seed).random((messages.shape[0], n))
    perm = np.argsort(keys, axis=1, kind="stable")
    entries = np.take_along_axis(base[cls], perm, axis=1)
    return Codebook(entries, plan, seed, messages, mtype, comps)


def _source_penalties(codebook: Codebook, P_V, source_weight: float) -> np.ndarray:
    """``source_weight * k * D(type_m || P_V)`` per message (``-inf`` for impossible messages)."""
    p = as_probs(P_V)
    types = codebook.plan.types
    kl = np.array([kl_divergence(q, p) for q in types.types])
    with np.errstate(invalid="ignore"):
        pen = source_weight * codebook.k * kl
    pen[np.isinf(kl)] = -math.inf
    return pen[codebook.message_type]


def _decode_batch(Y: np.ndarray, logW: np.ndarray, entries: np.ndarray, penalty: np.ndarray) -> np.ndarray:
    """Argmax message for every row of ``Y``; first index wins ties."""
    out = np.empty(Y.shape[0], dtype=np.int64)
    step = max(1, CHUNK // max(entries.shape[0], 1))
    for s in range(0, Y.shape[0], step):
        y = Y[s : s + step]
        score = np.zeros((y.shape[0], entries.shape[0])) + penalty[None, :]
        for j in range(entries.shape[1]):
            score += logW[entries[:, j]][:, y[:, j]].T
        out[s : s + step] = np.argmax(score, axis=1)
    return out


def decode(y, codebook: Codebook, P_V, W, source_weight: float = SOURCE_WEIGHT) -> int:
    """Index of the message maximizing ``log W^n(y|x_m) + source_weight * k * D(type_m || P_V)``.

    Ties go to the lexicographically smallest source sequence.
    """
    y = np.asarray(y, dtype=np.int64)
    if y.shape != (codebook.n,):
        raise ValueError(f"y must have length {codebook.n}")
    with np.errstate(divide="ignore"):
        logW = np.log(as_channel(W))
    pen = _source_penalties(codebook, P_V, source_weight)
    return int(_decode_batch(y[None], logW, codebook.entries, pen)[0])


def wilson_interval(errors: int, trials: int, z: float = 1.959963984540054):
    """Wilson score interval ``(center, half_width)`` for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be positive")
    p = errors / trials
    den = 1 + z * z / trials
    center = (p + z * z / (2 * trials)) / den
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / den
    return center, half


@dataclass(frozen=True)
class SimResult:
    """Error probability estimate of one codebook."""

    n: int
    k: int
    trials: int
    errors: int
    p_e: float
    half_width: float
    exact: bool
    bound_exponent: float = math.nan
    per_type: np.ndarray | None = None  # conditional error rate given each source type
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if not 0.0 <= self.p_e <= 1.0:
            raise ValueError(f"p_e={self.p_e} outside [0, 1]")

    @property
    def sigma(self) -> float:
        """Binomial standard deviation of the estimate (0 for exact results)."""
        if self.exact:
            return 0.0
        return math.sqrt(self.p_e * (1 - self.p_e) / self.trials)

    @property
    def empirical_exponent(self) -> float:
        return -math.log(self.p_e) / self.n if self.p_e > 0 else math.inf

    def exponent_interval(self) -> tuple[float, float]:
        """Exponents at the upper and lower ends of the confidence interval."""
        if self.exact:
            e = self.empirical_exponent
            return e, e
        lo_p, hi_p = wilson_bounds(self.errors, self.trials)
        return -math.log(hi_p) / self.n, (-math.log(lo_p) / self.n if lo_p > 0 else math.inf)


def wilson_bounds(errors: int, trials: int, z: float = 1.959963984540054):
    c, h = wilson_interval(errors, trials, z)
    # the ends are exactly 0 and 1 at the extreme counts; c - h alone leaves rounding noise
    lo = 0.0 if errors == 0 else max(0.0, c - h)
    hi = 1.0 if errors == trials else min(1.0, c + h)
    return lo, hi


def _message_law(codebook: Codebook, P_V) -> np.ndarray:
    p = as_probs(P_V)
    with np.errstate(divide="ignore"):
        logp = np.log(p)
    return np.exp(logp[codebook.messages].sum(axis=1))


def _per_type(codebook: Codebook, weight: np.ndarray, err_weight: np.ndarray) -> np.ndarray:
    N = len(codebook.plan.types)
    tot = np.bincount(codebook.message_type, weights=weight, minlength=N)
    err = np.bincount(codebook.message_type, weights=err_weight, minlength=N)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(tot > 0, err / tot, np.nan)


def exact_error(codebook: Codebook, W, P_V, source_weight: float = SOURCE_WEIGHT, force: bool = False):
    """Exact error probability by enumerating every channel output sequence.

    Uses ``1 - p_e = sum_y P(m(y)) W^n(y | x_{m(y)})`` with ``m(y)`` the decision.
    Returns ``(p_e, per_type)``.
    """
    W = as_channel(W)
    Y = W.shape[1]
    n = codebook.n
    if Y**n > MAX_EXACT_OUTPUTS and not force:
        raise OverflowError(f"{Y}^{n} outputs exceeds the enumeration cap {MAX_EXACT_OUTPUTS}")
    with np.errstate(divide="ignore"):
        logW = np.log(W)
    pen = _source_penalties(codebook, P_V, source_weight)
    law = _message_law(codebook, P_V)
    M = law.size
    correct = np.zeros(M)
    powers = Y ** np.arange(n - 1, -1, -1)
    step = max(1, CHUNK // max(M, 1))
    for s in range(0, Y**n, step):
        idx = np.arange(s, min(s + step, Y**n))
        ys = (idx[:, None] // powers[None, :]) % Y
        dec = _decode_batch(ys, logW, codebook.entries, pen)
        lik = np.exp(logW[codebook.entries[dec], ys].sum(axis=1))
        correct += np.bincount(dec, weights=lik, minlength=M)
    p_e = float(min(1.0, max(0.0, 1.0 - float(np.dot(law, correct)))))
    return p_e, _per_type(codebook, law, law * (1.0 - correct))


def estimate_error(
    codebook: Codebook,
    W,
    P_V,
    trials: int,
    seed=0,
    exact: bool = False,
    source_weight: float = SOURCE_WEIGHT,
    bound_exponent: float = math.nan,
) -> SimResult:
    """Monte Carlo estimate (or exact value with ``exact=True``) of the error probability."""
    if trials < 1:
        raise ValueError("trials must be positive")
    if exact:
        p_e, per_type = exact_error(codebook, W, P_V, source_weight, force=True)
        return SimResult(codebook.n, codebook.k, trials, -1, p_e, 0.0, True, bound_exponent, per_type)
    W = as_channel(W)
    with np.errstate(divide="ignore"):
        logW = np.log(W)
    cumW = np.cumsum(W, axis=1)[:, :-1]
    pen = _source_penalties(codebook, P_V, source_weight)
    law = _message_law(codebook, P_V)
    rng = _generator(*np.atleast_1d(seed).tolist())
    sent = rng.choice(law.size, size=trials, p=law / law.sum())
    x = codebook.entries[sent]
    u = rng.random(x.shape)
    y = (u[..., None] >= cumW[x]).sum(axis=-1)
    dec = _decode_batch(y, logW, codebook.entries, pen)
    wrong = dec != sent
    errors = int(wrong.sum())
    _, half = wilson_interval(errors, trials)
    tt = codebook.message_type[sent]
    N = len(codebook.plan.types)
    tot = np.bincount(tt, minlength=N)
    err = np.bincount(tt, weights=wrong, minlength=N)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_type = np.where(tot > 0, err / np.maximum(tot, 1), np.nan)
    return SimResult(codebook.n, codebook.k, trials, errors, errors / trials, half, False, bound_exponent, per_type)


def union_bound(exponent: float, n: int, k: int, source_size: int, num_type_classes: int) -> float:
    """``min(1, (k+1)^{|V|} N_k exp(-n E))``: the finite-n bound with its polynomial prefactors."""
    log_b = source_size * math.log(k + 1) + math.log(num_type_classes) - n * exponent
    return 1.0 if log_b >= 0 else math.exp(log_b)


def expurgate_best_of(
    plan,
    n: int,
    M: int,
    trials: int,
    seed,
    W,
    P_V,
    exact: bool = False,
    source_weight: float = SOURCE_WEIGHT,
    bound_exponent: float = math.nan,
):
    """Sample ``M`` codebooks, keep the one with the smallest estimated error.

    Codebook ``j`` uses the stream ``(seed, j)``.  Selection uses one Monte
    Carlo stream and the reported result an independent one, so the winner's
    estimate is not biased by the selection.  With ``exact=True`` both are
    the exact value.  Returns ``(codebook, result)``; ``result.meta`` holds
    every candidate's selection estimate.
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    base = tuple(np.atleast_1d(seed).tolist())
    books, scores = [], []
    for j in range(M):
        cb = sample_codebook(plan, n, base + (j,))
        r = estimate_error(cb, W, P_V, trials, base + (j, 1), exact, source_weight)
        books.append(cb)
        scores.append(r.p_e)
    best = int(np.argmin(scores))
    if exact:
        res = estimate_error(books[best], W, P_V, trials, base + (best, 1), True, source_weight, bound_exponent)
    else:
        res = estimate_error(books[best], W, P_V, trials, base + (best, 2), False, source_weight, bound_exponent)
    res.meta.update(candidates=scores, best=best)
    return books[best], res


"""Failure-probability numerics for randomly partitioned committee trees.

Two partition models are supported: sampling the Byzantine set without
replacement with an exact count M (hypergeometric) and independent corruption
of each node with probability P (binomial).  For each failure event the module
offers the exact tail where tractable and a closed-form upper bound; all tail
work happens in log space so probabilities remain meaningful down to 1e-300.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidInputError

# ---------------------------------------------------------------------------
# model / event types


@dataclass(frozen=True)
class ExactCount:
    """Exactly M Byzantine nodes, placed by sampling without replacement."""

    m: int


@dataclass(frozen=True)
class Fraction:
    """Each node is independently Byzantine with probability P."""

    p: float


@dataclass(frozen=True)
class PartitionModel:
    n_total: int
    sizes: tuple[int, ...]
    adversary: ExactCount | Fraction

    def __post_init__(self):
        if sum(self.sizes) != self.n_total:
            raise InvalidInputError("committee sizes must sum to N")
        if any(s < 1 for s in self.sizes):
            raise InvalidInputError("committee sizes must be positive")
        if isinstance(self.adversary, ExactCount):
            if not 0 <= self.adversary.m < self.n_total:
                raise InvalidInputError("need 0 <= M < N")
        else:
            if not 0.0 < self.adversary.p < 1.0:
                raise InvalidInputError("need 0 < P < 1")

    @property
    def k(self) -> int:
        return len(self.sizes)

    @property
    def p(self) -> float:
        if isinstance(self.adversary, ExactCount):
            return self.adversary.m / self.n_total
        return self.adversary.p


@dataclass(frozen=True)
class E0:
    """Byzantine leader."""


@dataclass(frozen=True)
class E1:
    """Some committee exceeds fraction `a` of Byzantine members."""

    a: float


@dataclass(frozen=True)
class E2:
    """Some merged sibling pair exceeds fraction `a`."""

    a: float


@dataclass(frozen=True)
class Ek:
    """The top `k` committees jointly exceed fraction `b`."""

    k: int
    b: float


@dataclass(frozen=True)
class SizingParams:
    n_total: int
    delta: float
    a: float
    p: float
    n_min: int = 1

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise InvalidInputError("need 0 < delta < 1")
        if not 0.0 < self.p < self.a < 1.0:
            raise InvalidInputError("need 0 < P < A < 1")
        if self.n_min < 1:
            raise InvalidInputError("n_min must be >= 1")


def sizes_for(n_total: int, k: int) -> tuple[int, ...]:
    """The n / n+1 split: the r highest-indexed committees get the extra node."""
    if not 1 <= k <= n_total:
        raise InvalidInputError("need 1 <= K <= N")
    n, r = divmod(n_total, k)
    return (n,) * (k - r) + (n + 1,) * r


# ---------------------------------------------------------------------------
# log-space building blocks


def log_binom(n: int, k: int) -> float:
    """log C(n, k); -inf outside the support."""
    if k < 0 or k > n:
        return -math.inf
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def _logsumexp(terms: list[float]) -> float:
    hi = max(terms, default=-math.inf)
    if hi == -math.inf:
        return -math.inf
    return hi + math.log(sum(math.exp(t - hi) for t in terms))


def log_binom_tail(n: int, p: float, k: int) -> float:
    """log P(X >= k) for X ~ Binomial(n, p)."""
    if not 0.0 < p < 1.0:
        raise InvalidInputError("need 0 < p < 1")
    if k <= 0:
        return 0.0
    if k > n:
        return -math.inf
    lp, lq = math.log(p), math.log1p(-p)
    terms = [log_binom(n, i) + i * lp + (n - i) * lq for i in range(k, n + 1)]
    return min(_logsumexp(terms), 0.0)


def binom_tail(n: int, p: float, k: int) -> float:
    return math.exp(log_binom_tail(n, p, k))


def log_hyper_tail(n_total: int, m: int, n_mu: int, k: int) -> float:
    """log P(X >= k) for X hypergeometric: n_mu draws, m marked of n_total."""
    if not (0 <= m <= n_total and 0 <= n_mu <= n_total):
        raise InvalidInputError("need M <= N and n_mu <= N")
    if k <= 0:
        return 0.0
    hi = min(n_mu, m)
    if k > hi:
        return -math.inf
    denom = log_binom(n_total, m)
    terms = [
        log_binom(n_mu, i) + log_binom(n_total - n_mu, m - i) - denom
        for i in range(k, hi + 1)
    ]
    return min(_logsumexp(terms), 0.0)


def hyper_tail(n_total: int, m: int, n_mu: int, k: int) -> float:
    return math.exp(log_hyper_tail(n_total, m, n_mu, k))


def kl_divergence(a: float, p: float) -> float:
    if not (0.0 < a < 1.0 and 0.0 < p < 1.0):
        raise InvalidInputError("kl_divergence needs arguments in (0, 1)")
    return a * math.log(a / p) + (1.0 - a) * math.log((1.0 - a) / (1.0 - p))


def _kl_with_boundary(a: float, p: float) -> float:
    # continuation of D(a||p) at a in {0, 1}, used by bound helpers
    if a <= 0.0:
        return -math.log1p(-p)
    if a >= 1.0:
        return -math.log(p)
    return kl_divergence(a, p)


def entropy_sandwich_log_binom(n: int, m: int, upper: bool) -> float:
    """Entropy-based bracket of log C(n, m) (avoids lgamma at huge n)."""
    if m <= 0 or m >= n:
        return 0.0 if m in (0, n) else -math.inf
    p = m / n
    h = -p * math.log(p) - (1 - p) * math.log1p(-p)
    if upper:
        return n * h + 0.5 * math.log(1.0 / (2 * math.pi * p * (1 - p) * n))
    return n * h + 0.5 * math.log(1.0 / (8 * p * (1 - p) * n))


# ---------------------------------------------------------------------------
# per-committee upper bounds


def _log_binom_kl_bound(size: int, p: float, threshold: int) -> float:
    """log of the sub-Gaussian-style binomial tail bound for P(X >= threshold)."""
    if threshold > size:
        return -math.inf
    a_mu = threshold / size
    if a_mu >= 1.0:
        # tail collapses to the single all-Byzantine outcome
        return size * math.log(p)
    if a_mu <= p:
        return 0.0  # bound degenerates; cap at 1
    r = p * (1 - a_mu) / (a_mu * (1 - p))
    val = (
        -math.log1p(-r)
        - size * kl_divergence(a_mu, p)
        - 0.5 * math.log(2 * math.pi * a_mu * (1 - a_mu) * size)
    )
    return min(val, 0.0)


def hoeffding_tail_bound(n_total: int, m: int, n_mu: int, a: float) -> float:
    """Hoeffding bound e^{-n_mu D(A(mu) || M/N)} on the hypergeometric tail."""
    threshold = math.floor(a * n_mu) + 1
    if threshold > n_mu:
        return 0.0
    a_mu = threshold / n_mu
    p = m / n_total
    if p <= 0.0:
        return 0.0
    return math.exp(-n_mu * _kl_with_boundary(a_mu, p))


def log_hyper_tail_bound(n_total: int, m: int, n_mu: int, a: float) -> float:
    """Log of the geometric-ratio bound on the hypergeometric upper tail.

    Valid when P + 1/N < A with P = M/N; refuses otherwise.
    """
    p = m / n_total
    if p + 1.0 / n_total >= a:
        raise InvalidInputError("bound requires P + 1/N < A")
    threshold = math.floor(a * n_mu) + 1
    if threshold > min(n_mu, m):
        return -math.inf
    a_mu = threshold / n_mu
    log_lead = (
        log_binom(n_total - n_mu, m - threshold)
        + log_binom(n_mu, threshold)
        - log_binom(n_total, m)
    )
    num = (p - threshold / n_total) * (1 - a_mu)
    den = (1 - p - n_mu / n_total + threshold / n_total) * a_mu
    r = num / den
    steps = n_mu - math.floor(a * n_mu)
    if r < 0.0:
        r = 0.0  # only the leading term has support
    if r >= 1.0:
        return 0.0  # geometric sum blows past 1; cap
    log_geo = math.log1p(-(r**steps)) - math.log1p(-r) if r > 0.0 else 0.0
    return min(log_lead + log_geo, 0.0)


def hyper_tail_bound(n_total: int, m: int, n_mu: int, a: float) -> float:
    return math.exp(log_hyper_tail_bound(n_total, m, n_mu, a))


# ---------------------------------------------------------------------------
# event probabilities


def _one_minus_prod_of_complements(log_tails: list[float]) -> float:
    """1 - prod(1 - t_mu) from log-space tails, accurate for tiny results."""
    acc = 0.0
    for lt in log_tails:
        if lt >= 0.0:
            return 1.0
        t = math.exp(lt)
        if t >= 1.0:
            return 1.0
        acc += math.log1p(-t)
    return -math.expm1(acc)


def _log_hyper_bound_or_trivial(n_total: int, m: int, size: int, a: float) -> float:
    """Geometric-ratio bound when its precondition holds, else the trivial 1."""
    try:
        return log_hyper_tail_bound(n_total, m, size, a)
    except InvalidInputError:
        return 0.0


def _union_bound(log_tails: list[float]) -> float:
    total = _logsumexp([t for t in log_tails if t > -math.inf])
    if total == -math.inf:
        return 0.0
    return min(math.exp(total), 1.0)


def delta_e1(model: PartitionModel, a: float, fast: bool = False) -> dict:
    """P(some committee exceeds fraction `a`): exact (binomial) and bound."""
    if not 0.0 < a < 1.0:
        raise InvalidInputError("need 0 < A < 1")
    thresholds = [math.floor(a * s) + 1 for s in model.sizes]
    if isinstance(model.adversary, Fraction):
        p = model.adversary.p
        exact = _one_minus_prod_of_complements(
            [log_binom_tail(s, p, t) for s, t in zip(model.sizes, thresholds)]
        )
        bound = _one_minus_prod_of_complements(
            [_log_binom_kl_bound(s, p, t) for s, t in zip(model.sizes, thresholds)]
        )
        return {"exact": exact, "bound": bound}
    m = model.adversary.m
    if fast and model.n_total >= 10**5:
        bound = _union_bound(
            [
                _fast_log_hyper_tail_bound(model.n_total, m, s, a)
                for s in model.sizes
            ]
        )
    else:
        bound = _union_bound(
            [_log_hyper_bound_or_trivial(model.n_total, m, s, a) for s in model.sizes]
        )
    return {"exact": None, "bound": bound}


def _fast_log_hyper_tail_bound(n_total: int, m: int, n_mu: int, a: float) -> float:
    """Geometric-ratio bound with the entropy sandwich replacing exact log-binomials."""
    p = m / n_total
    if p + 1.0 / n_total >= a:
        raise InvalidInputError("bound requires P + 1/N < A")
    threshold = math.floor(a * n_mu) + 1
    if threshold > min(n_mu, m):
        return -math.inf
    a_mu = threshold / n_mu
    log_lead = (
        entropy_sandwich_log_binom(n_total - n_mu, m - threshold, upper=True)
        + entropy_sandwich_log_binom(n_mu, threshold, upper=True)
        - entropy_sandwich_log_binom(n_total, m, upper=False)
    )
    num = (p - threshold / n_total) * (1 - a_mu)
    den = (1 - p - n_mu / n_total + threshold / n_total) * a_mu
    r = max(num / den, 0.0)
    if r >= 1.0:
        return 0.0
    steps = n_mu - math.floor(a * n_mu)
    log_geo = math.log1p(-(r**steps)) - math.log1p(-r) if r > 0.0 else 0.0
    return min(log_lead + log_geo, 0.0)


def sibling_pair_sizes(sizes: tuple[int, ...]) -> tuple[int, ...]:
    """Merged sizes S_2..S_Ktilde for odd K: (N2+N3, N4+N5, ...)."""
    k = len(sizes)
    if k % 2 == 0:
        raise InvalidInputError("sibling pairs require an odd committee count")
    return tuple(sizes[i] + sizes[i + 1] for i in range(1, k, 2))


def delta_e2(model: PartitionModel, a: float) -> dict:
    """P(some merged sibling pair exceeds fraction `a`)."""
    if not 0.0 < a < 1.0:
        raise InvalidInputError("need 0 < A < 1")
    pairs = sibling_pair_sizes(model.sizes)
    if not pairs:
        return {"exact": 0.0, "bound": 0.0}
    thresholds = [math.floor(a * s) + 1 for s in pairs]
    if isinstance(model.adversary, Fraction):
        p = model.adversary.p
        exact = _one_minus_prod_of_complements(
            [log_binom_tail(s, p, t) for s, t in zip(pairs, thresholds)]
        )
        bound = _one_minus_prod_of_complements(
            [_log_binom_kl_bound(s, p, t) for s, t in zip(pairs, thresholds)]
        )
        return {"exact": exact, "bound": bound}
    m = model.adversary.m
    bound = _union_bound(
        [_log_hyper_bound_or_trivial(model.n_total, m, s, a) for s in pairs]
    )
    return {"exact": None, "bound": bound}


def delta_ek(model: PartitionModel, k: int, b: float) -> dict:
    """P(top-k committees jointly exceed fraction `b`)."""
    if not 1 <= k <= model.k:
        raise InvalidInputError("need 1 <= k <= K")
    if not 0.0 < b < 1.0:
        raise InvalidInputError("need 0 < B < 1")
    s_k = sum(model.sizes[:k])
    threshold = math.floor(b * s_k) + 1
    if isinstance(model.adversary, Fraction):
        p = model.adversary.p
        exact = math.exp(log_binom_tail(s_k, p, threshold))
        bound = math.exp(_log_binom_kl_bound(s_k, p, threshold))
        return {"exact": exact, "bound": min(bound, 1.0)}
    m = model.adversary.m
    exact = math.exp(log_hyper_tail(model.n_total, m, s_k, threshold))
    bound = math.exp(_log_hyper_bound_or_trivial(model.n_total, m, s_k, b))
    return {"exact": exact, "bound": bound}


def delta_e0(model: PartitionModel) -> float:
    """Probability the leader draw lands on a Byzantine node."""
    return model.p


# ---------------------------------------------------------------------------
# brute-force oracles (tests only)

_BF_HYPER_MAX_N = 14
_BF_BINOM_MAX_N = 20


def _event_holds(counts: list[int], sizes: tuple[int, ...], event) -> bool:
    if isinstance(event, E1):
        return any(
            c >= math.floor(event.a * s) + 1 for c, s in zip(counts, sizes)
        )
    if isinstance(event, E2):
        k = len(sizes)
        if k % 2 == 0:
            raise InvalidInputError("E2 requires odd K")
        for i in range(1, k, 2):
            s = sizes[i] + sizes[i + 1]
            if counts[i] + counts[i + 1] >= math.floor(event.a * s) + 1:
                return True
        return False
    if isinstance(event, Ek):
        s = sum(sizes[: event.k])
        return sum(counts[: event.k]) >= math.floor(event.b * s) + 1
    raise InvalidInputError(f"unsupported event {type(event).__name__}")


def brute_force_delta(model: PartitionModel, event) -> float:
    """Exact event probability by exhaustive enumeration (small N only)."""
    if isinstance(event, E0):
        return model.p
    sizes = model.sizes
    n_total = model.n_total
    if isinstance(model.adversary, ExactCount):
        if n_total > _BF_HYPER_MAX_N:
            raise InvalidInputError(
                f"hypergeometric enumeration capped at N <= {_BF_HYPER_MAX_N}"
            )
        from itertools import combinations

        # committee of node i by contiguous blocks; exchangeability makes the
        # labeling irrelevant
        owner = []
        for mu, s in enumerate(sizes):
            owner.extend([mu] * s)
        m = model.adversary.m
        hits = 0
        total = 0
        for picks in combinations(range(n_total), m):
            counts = [0] * len(sizes)
            for node in picks:
                counts[owner[node]] += 1
            total += 1
            if _event_holds(counts, sizes, event):
                hits += 1
        return hits / total
    if n_total > _BF_BINOM_MAX_N:
        raise InvalidInputError(
            f"binomial enumeration capped at N <= {_BF_BINOM_MAX_N}"
        )
    import numpy as np

    p = model.adversary.p
    patterns = np.arange(1 << n_total, dtype=np.uint32)
    pop16 = np.array(
        [bin(i).count("1") for i in range(1 << 16)], dtype=np.uint8
    )

    def popcount(x):
        return pop16[x & 0xFFFF].astype(np.int64) + pop16[(x >> 16) & 0xFFFF]

    counts = []
    offset = 0
    for s in sizes:
        mask = ((1 << s) - 1) << offset
        counts.append(popcount(patterns & np.uint32(mask)))
        offset += s
    counts = np.stack(counts)  # (K, 2^N)
    total_bits = counts.sum(axis=0)
    weights = np.exp(
        total_bits * math.log(p) + (n_total - total_bits) * math.log1p(-p)
    )
    if isinstance(event, E1):
        thr = np.array([math.floor(event.a * s) + 1 for s in sizes])
        hit = (counts >= thr[:, None]).any(axis=0)
    elif isinstance(event, E2):
        if len(sizes) % 2 == 0:
            raise InvalidInputError("E2 requires odd K")
        hit = np.zeros(patterns.shape, dtype=bool)
        for i in range(1, len(sizes), 2):
            s = sizes[i] + sizes[i + 1]
            thr = math.floor(event.a * s) + 1
            hit |= (counts[i] + counts[i + 1]) >= thr
    elif isinstance(event, Ek):
        s = sum(sizes[: event.k])
        thr = math.floor(event.b * s) + 1
        hit = counts[: event.k].sum(axis=0) >= thr
    else:
        raise InvalidInputError(f"unsupported event {type(event).__name__}")
    return float(weights[hit].sum())


# ---------------------------------------------------------------------------
# sizing

def committee_size_solver(params: SizingParams) -> dict:
    """Largest odd committee count whose exact binomial failure stays <= delta.

    Walks K = 1, 3, 5, ... evaluating the exact product-form failure
    probability with the n / n+1 size split, and returns the last
    configuration before the probability first exceeds the budget.  K = 1 is
    the universal fallback with a recorded probability of 0.
    """
    n_total, delta, a, p = params.n_total, params.delta, params.a, params.p
    saved = {"k": 1, "n": n_total, "r": 0, "prob": 0.0}
    m = 0
    while True:
        m += 1
        k = 2 * m + 1
        if k > n_total:
            return saved
        n, r = divmod(n_total, k)
        lt0 = log_binom_tail(n, p, math.floor(a * n) + 1)
        acc = (k - r) * math.log1p(-math.exp(lt0))
        if r > 0:
            lt1 = log_binom_tail(n + 1, p, math.floor(a * (n + 1)) + 1)
            acc += r * math.log1p(-math.exp(lt1))
        prob = -math.expm1(acc)
        if prob > delta:
            return saved
        saved = {"k": k, "n": n, "r": r, "prob": prob}


def committee_size_upper_bound(params: SizingParams) -> float:
    """Logarithmic cap on the committee size: log(N / (n_min * delta)) / D(A||P)."""
    return math.log(params.n_total / (params.n_min * params.delta)) / kl_divergence(
        params.a, params.p
    )


# ---------------------------------------------------------------------------
# protocol-level bounds


def qc_necessary_condition_bound(model: PartitionModel) -> dict:
    """Lower bound 1 - P - d(E2(1/3)) - d(E3(1/3)) on honest QC support."""
    p = model.p
    d2 = delta_e2(model, 1.0 / 3.0)["bound"]
    d3 = delta_ek(model, min(3, model.k), 1.0 / 3.0)["bound"]
    value = 1.0 - p - d2 - d3
    return {"value": value, "below_two_thirds": value <= 2.0 / 3.0}


def safety_failure_bound(model: PartitionModel) -> float:
    """Union bound d(E3(2/3)) + d(E1(1/2)) on the safety failure event."""
    d3 = delta_ek(model, min(3, model.k), 2.0 / 3.0)["bound"]
    d1 = delta_e1(model, 0.5)["bound"]
    return min(d3 + d1, 1.0)

"""Closed-form and exactly computable quantities for Bloom-filter coding over
the OR multiple-access channel.

Entropies are in bits. ``sumrate_threshold`` is the one function returning
nats; use :func:`nats_to_bits` to convert.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import special, stats

from .bloom import weight_pmf, weight_pmf_ladder, _check_work
from .exceptions import DomainError, ParameterError
from .validation import check_int, check_positive, check_real, check_unit_open

LN2 = math.log(2.0)
# weight-law entries below this are dropped from exact double sums
PMF_CUTOFF = 1e-18


def nats_to_bits(x: float) -> float:
    return x / LN2


def binary_entropy(x: float) -> float:
    """h2(x) in bits, with h2(0) = h2(1) = 0."""
    x = check_real(x, "x", 0.0, 1.0)
    if x in (0.0, 1.0):
        return 0.0
    return float(-(x * math.log2(x) + (1.0 - x) * math.log2(1.0 - x)))


def _entropy_bits(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def _log2_comb(n, k) -> np.ndarray:
    n = np.asarray(n, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    return (special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1)) / LN2


def entropy_limit(kappa: float) -> float:
    """Limit of H(BF(L, K))/L when K/L -> kappa."""
    kappa = check_positive(kappa, "kappa")
    return binary_entropy(math.exp(-kappa))


def conditional_entropy_limit(kappa1: float, kappa2: float) -> float:
    """Limit of H(BF1 + BF2 | BF1)/L for K_i/L -> kappa_i."""
    kappa1 = check_positive(kappa1, "kappa1")
    kappa2 = check_positive(kappa2, "kappa2")
    return math.exp(-kappa1) * binary_entropy(math.exp(-kappa2))


def exact_entropy(L: int, K: int) -> float:
    """H(BF(L, K)) in bits: H(w) plus E log2 C(L, w), since the array is
    uniform over its C(L, w) patterns given the weight."""
    law = weight_pmf(L, K).probs
    w = np.arange(law.size)
    return _entropy_bits(law) + float(np.dot(law, _log2_comb(L, w)))


def _new_cover_laws(L: int, zeros: np.ndarray, K2: int) -> np.ndarray:
    """Row i: law of the number of the ``zeros[i]`` empty positions hit by K2
    extra hashes, indexed 0..min(K2, max zeros)."""
    top = int(min(K2, zeros.max(initial=0)))
    d = np.arange(top + 1, dtype=np.float64)[None, :]
    z = zeros.astype(np.float64)[:, None]
    stay = np.clip((L - z + d) / L, 0.0, 1.0)
    move = np.clip((z - d + 1) / L, 0.0, 1.0)[:, 1:]
    probs = np.zeros((zeros.size, top + 1))
    probs[:, 0] = 1.0
    for _ in range(K2):
        nxt = probs * stay
        nxt[:, 1:] += probs[:, :-1] * move
        probs = nxt
    return probs


def exact_conditional_entropy(L: int, K1: int, K2: int) -> float:
    """H(BF(L, K1) + BF(L, K2) | BF(L, K1)) in bits.

    Given the first filter with z1 zeros, the output is determined by which of
    those z1 positions get covered; by symmetry that set is uniform given its
    size d, so the entropy is E[H(d | z1) + E log2 C(z1, d)].
    """
    L = check_int(L, "L", 1)
    K1 = check_int(K1, "K1", 0)
    K2 = check_int(K2, "K2", 0)
    if K2 == 0:
        return 0.0
    _check_work(L, K1 + K2)
    first = weight_pmf(L, K1).probs
    w1 = np.flatnonzero(first > PMF_CUTOFF * first.max())
    p1 = first[w1]
    zeros = L - w1
    laws = _new_cover_laws(L, zeros, K2)
    d = np.arange(laws.shape[1])
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(laws > 0, laws * np.log2(np.where(laws > 0, laws, 1.0)), 0.0)
        log_c = np.where(d[None, :] <= zeros[:, None], _log2_comb(zeros[:, None], d[None, :]), 0.0)
    per_z1 = -plogp.sum(axis=1) + (laws * log_c).sum(axis=1)
    return float(np.dot(p1, per_z1) / p1.sum())


def subset_rates(L: int, Ks: Sequence[int]) -> dict[tuple[int, ...], float]:
    """Normalized (1/L) I(x_S; y | x_rest) for every nonempty user subset S.

    Given the other users' arrays the output only depends on their union, a
    BF(L, sum of their K), so each term is an exact (conditional) entropy.
    """
    Ks = [check_int(k, "K", 1) for k in Ks]
    if not 1 <= len(Ks) <= 4:
        raise ParameterError("subset rates are evaluated for 1 to 4 users")
    out = {}
    users = range(len(Ks))
    for r in range(1, len(Ks) + 1):
        for subset in itertools.combinations(users, r):
            k_in = sum(Ks[i] for i in subset)
            k_out = sum(Ks) - k_in
            h = exact_conditional_entropy(L, k_out, k_in) if k_out else exact_entropy(L, k_in)
            out[subset] = h / L
    return out


@dataclass(frozen=True)
class RatePoint:
    """Per-user rates and their sum, in bits per channel use."""

    rates: tuple[float, ...]

    def __post_init__(self):
        rates = tuple(float(r) for r in self.rates)
        if any(r < 0 or math.isnan(r) for r in rates):
            raise DomainError("rates must be nonnegative")
        object.__setattr__(self, "rates", rates)

    @property
    def sum_rate(self) -> float:
        return math.fsum(self.rates)


@dataclass(frozen=True)
class RateRegion:
    """Two-user pentagon R1 <= r1_max, R2 <= r2_max, R1 + R2 <= sum_max."""

    r1_max: float
    r2_max: float
    sum_max: float

    @property
    def R_sum(self) -> float:
        return self.sum_max

    def corners(self) -> tuple[RatePoint, RatePoint]:
        """The two vertices on the sum-rate face."""
        a = RatePoint((self.r1_max, max(self.sum_max - self.r1_max, 0.0)))
        b = RatePoint((max(self.sum_max - self.r2_max, 0.0), self.r2_max))
        return a, b

    def contains(self, point: RatePoint, tol: float = 1e-12) -> bool:
        r1, r2 = point.rates
        return r1 <= self.r1_max + tol and r2 <= self.r2_max + tol and point.sum_rate <= self.sum_max + tol


def rate_region_point(kappa1: float, kappa2: float) -> RateRegion:
    """Two-user rates supported by BF(L, kappa1 L) and BF(L, kappa2 L) inputs."""
    kappa1 = check_positive(kappa1, "kappa1")
    kappa2 = check_positive(kappa2, "kappa2")
    r1 = math.exp(-kappa2) * binary_entropy(math.exp(-kappa1))
    r2 = math.exp(-kappa1) * binary_entropy(math.exp(-kappa2))
    return RateRegion(r1, r2, binary_entropy(math.exp(-(kappa1 + kappa2))))


def capacity_membership(rates: RatePoint | Sequence[float], tol: float = 1e-12) -> bool:
    """Whether the rate vector lies in the OR MAC capacity region (sum <= 1 bit)."""
    point = rates if isinstance(rates, RatePoint) else RatePoint(tuple(rates))
    return point.sum_rate <= 1.0 + tol


def log_survival(x, n) -> np.ndarray:
    """log((1 - x)^n) with 0 * log(0) taken as 0."""
    x = np.asarray(x, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = n * np.log1p(-x)
    return np.where(n == 0, 0.0, out)


def false_alarm_prob(w, L: int, K: int) -> np.ndarray:
    """(w/L)^K: a fresh BF(L, K) is contained in a fixed array of weight w."""
    w = np.asarray(w, dtype=np.float64)
    return np.power(w / L, K)


def success_prob_exact(N: int, M: int, L: int, K: int) -> float:
    """Probability that per-user containment decoding recovers every message
    with N users, M messages each and BF(L, K) codewords."""
    N = check_int(N, "N", 1)
    M = check_int(M, "M", 1)
    L = check_int(L, "L", 1)
    K = check_int(K, "K", 1)
    if M == 1:
        return 1.0
    law = weight_pmf(L, N * K).probs
    w = np.arange(law.size)
    others = N * (float(M) - 1.0)
    terms = law * np.exp(log_survival(false_alarm_prob(w, L, K), others))
    return float(min(terms.sum(), 1.0))


def sumrate_threshold(kappa: float, eps: float = 0.0) -> float:
    """-kappa ln(1 - exp(-kappa) + eps), in nats per channel use."""
    kappa = check_positive(kappa, "kappa")
    eps = check_real(eps, "eps", low=0.0)
    arg = 1.0 - math.exp(-kappa) + eps
    if arg <= 0.0:
        raise DomainError("1 - exp(-kappa) + eps must be positive")
    return -kappa * math.log(arg)


class ProbabilityBound(NamedTuple):
    value: float  # clamped to [0, 1]
    raw: float
    exact: float | None = None


def ar_success_exact(N: int, a: int, L: int, K: int) -> float:
    """Pr[activity recognition correct | a active users]."""
    N = check_int(N, "N", 1)
    a = check_int(a, "a", 0)
    if a > N:
        raise ParameterError("a must not exceed N")
    law = weight_pmf(L, a * K).probs
    w = np.arange(law.size)
    return float(min((law * np.exp(log_survival(false_alarm_prob(w, L, K), N - a))).sum(), 1.0))


def ar_success_lower_bound(N: int, a: int, L: int, K: int, eps: float,
                           with_exact: bool = True) -> ProbabilityBound:
    """1 - N(1 - p + eps)^K - 2 exp(-eps^2 L^2 / (2aK)), p = (1 - 1/L)^(aK)."""
    N = check_int(N, "N", 1)
    a = check_int(a, "a", 1)
    L = check_int(L, "L", 1)
    K = check_int(K, "K", 1)
    eps = check_real(eps, "eps", low=0.0, low_open=True)
    p = math.exp(a * K * math.log1p(-1.0 / L)) if L > 1 else 0.0
    raw = 1.0 - N * (1.0 - p + eps) ** K - 2.0 * math.exp(-(eps * L) ** 2 / (2.0 * a * K))
    exact = ar_success_exact(N, a, L, K) if with_exact else None
    return ProbabilityBound(min(max(raw, 0.0), 1.0), raw, exact)


def best_ar_lower_bound(N: int, a: int, L: int, K: int, n_grid: int = 200) -> ProbabilityBound:
    """Largest lower bound over a grid of eps in (0, 1)."""
    best = None
    for eps in np.linspace(1e-3, 0.5, n_grid):
        b = ar_success_lower_bound(N, a, L, K, float(eps), with_exact=False)
        if best is None or b.raw > best.raw:
            best = b
    return best


def two_phase_q(a, w1, w2, L1: int, L2: int, K1: int, K2: int, M: int, N: int):
    """Pr[two-phase decoding correct | a actives, phase weights w1, w2].

    Accepts arrays for ``w1``/``w2`` (broadcast) and returns a float for scalar
    input. Evaluated in the log domain.
    """
    x1 = false_alarm_prob(w1, L1, K1)
    x2 = false_alarm_prob(w2, L2, K2)
    active_ok = log_survival(x2, np.asarray(a, dtype=np.float64) * (float(M) - 1.0))
    any_msg = -np.expm1(log_survival(x2, float(M)))
    inactive_ok = log_survival(x1 * any_msg, np.asarray(N, dtype=np.float64) - a)
    q = np.exp(active_ok + inactive_ok)
    return float(q) if np.ndim(q) == 0 else q


def feasibility_mt(kappa1: float, kappa2: float, beta: float, gamma: float) -> bool:
    """Sufficient condition for the two-phase scheme to drive errors to zero."""
    return bool(kappa2 * LN2 - beta - gamma > 0 and (kappa1 + kappa2) * LN2 - 1 - gamma > 0)


@dataclass(frozen=True)
class CostBounds:
    lower: float
    upper: float

    def __post_init__(self):
        if not 0 <= self.lower <= self.upper:
            raise DomainError(f"invalid cost interval [{self.lower}, {self.upper}]")


def cost_bounds_ar(beta: float) -> CostBounds:
    """Interval containing the minimum feasible activity recognition cost."""
    beta = check_unit_open(beta, "beta")
    return CostBounds(1.0 - beta, 1.0 / LN2)


def cost_bounds_mt(beta: float, gamma: float) -> CostBounds:
    """Interval containing the minimum feasible message transmission cost."""
    beta = check_unit_open(beta, "beta")
    gamma = check_real(gamma, "gamma", low=0.0)
    return CostBounds(1.0 - beta + gamma, (1.0 + gamma) / LN2)


# -- exact scheme-level error probabilities used as harness comparison columns

def _active_count_law(N: int, mean_active: float, cover: float = 1e-12):
    """Support and probabilities of the Binomial(N, N_a/N) active count."""
    q = min(max(mean_active / N, 0.0), 1.0)
    dist = stats.binom(N, q)
    lo = int(dist.ppf(cover / 2)) if q < 1 else N
    hi = int(dist.isf(cover / 2)) + 1 if q < 1 else N
    a = np.arange(max(lo, 0), min(hi, N) + 1)
    return a, dist.pmf(a)


def ar_success_by_active(N: int, L: int, K: int, a_values: np.ndarray) -> np.ndarray:
    """Exact Pr[correct | a] for every a in ``a_values`` (one recurrence pass)."""
    a_values = np.asarray(a_values, dtype=np.int64)
    rows = weight_pmf_ladder(L, K, int(a_values.max(initial=0)))
    w = np.arange(L + 1)
    x = false_alarm_prob(w, L, K)
    out = np.empty(a_values.size)
    for i, a in enumerate(a_values):
        out[i] = np.dot(rows[a], np.exp(log_survival(x, N - a)))
    return np.minimum(out, 1.0)


def ar_success_unconditional(N: int, mean_active: float, L: int, K: int) -> float:
    a, pa = _active_count_law(N, mean_active)
    return float(np.dot(pa, ar_success_by_active(N, L, K, a)))


def mt_success_by_active(N: int, M: int, L1: int, K1: int, L2: int, K2: int,
                         a_values: np.ndarray) -> np.ndarray:
    """Exact two-phase success probability given a, summing q over (w1, w2)."""
    a_values = np.asarray(a_values, dtype=np.int64)
    a_max = int(a_values.max(initial=0))
    rows1 = weight_pmf_ladder(L1, K1, a_max)
    rows2 = weight_pmf_ladder(L2, K2, a_max)
    out = np.empty(a_values.size)
    for i, a in enumerate(a_values):
        r1, r2 = rows1[a], rows2[a]
        w1 = np.flatnonzero(r1 > PMF_CUTOFF * r1.max())
        w2 = np.flatnonzero(r2 > PMF_CUTOFF * r2.max())
        q = two_phase_q(a, w1[:, None], w2[None, :], L1, L2, K1, K2, M, N)
        out[i] = r1[w1] @ np.asarray(q) @ r2[w2]
    return np.minimum(out, 1.0)


def mt_success_unconditional(N: int, mean_active: float, M: int, L1: int, K1: int,
                             L2: int, K2: int) -> float:
    a, pa = _active_count_law(N, mean_active)
    return float(np.dot(pa, mt_success_by_active(N, M, L1, K1, L2, K2, a)))

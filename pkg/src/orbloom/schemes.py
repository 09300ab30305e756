"""Encoders, the OR channel and decoders for the three settings: fixed-N
message transmission, activity recognition, and two-phase message
transmission with partial activity recognition.

Every codeword is regenerated on demand from ``(seed, user, phase, message)``,
so encoder and decoder share codebooks without storing them. Decoders probe
hash positions lazily and stop at the first empty position, which both keeps
large populations cheap and yields the hash counts reported by the harness.
"""

from __future__ import annotations

import dataclasses
import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _hashing
from .analysis import LN2, false_alarm_prob, log_survival
from .bloom import BloomFilter, HashSpec, weight
from .exceptions import ParameterError, ResourceError
from .validation import (check_binary_array, check_int, check_positive, check_real,
                         check_same_length, check_unit_open)

PHASE_MAC = 0
PHASE_SIGNATURE = 1
PHASE_MESSAGE = 2

INACTIVE = -1
AMBIGUOUS = -2
JOINT_GUARD = 10**6
EXPLICIT_MAX_MESSAGES = 4096


@dataclass(frozen=True)
class Scenario:
    """Everything needed to reproduce an experiment.

    Derived quantities follow fixed rounding rules: ``N_a = round(c_a N^beta)``,
    ``M = max(1, round(c_m N^gamma))``, ``L = ceil(cost * N_a * log2 N)`` and
    ``K = max(1, round(L / N_a * ln 2))``. Any of them can be pinned with the
    override fields. In the fixed-N setting (``mac``) ``length`` is required and
    ``K`` defaults to ``round(kappa * L / N)``; giving ``rate`` (bits per channel
    use, summed over users) sets ``M = round(2^(L * rate / N))``.
    """

    n_users: int
    beta: float = 0.5
    gamma: float = 0.0
    omega_a: float = 1.6
    kappa: float = LN2
    kappa1: float = 1.0
    kappa2: float = 2.0
    n_messages: int | None = None
    rate: float | None = None
    length: int | None = None
    n_hashes: int | None = None
    length2: int | None = None
    n_hashes2: int | None = None
    active_count: int | None = None
    active_scale: float = 1.0
    message_scale: float = 1.0
    codebook: str = "auto"
    seed: int = 0

    def __post_init__(self):
        check_int(self.n_users, "N", 1)
        check_unit_open(self.beta, "beta")
        check_real(self.gamma, "gamma", low=0.0)
        for name in ("omega_a", "kappa", "kappa1", "kappa2", "active_scale", "message_scale"):
            check_positive(getattr(self, name), name)
        for name in ("n_messages", "length", "n_hashes", "length2", "n_hashes2"):
            if getattr(self, name) is not None:
                check_int(getattr(self, name), name, 1)
        if self.rate is not None:
            check_positive(self.rate, "rate")
        if self.active_count is not None:
            check_int(self.active_count, "active_count", 0)
            if self.active_count > self.n_users:
                raise ParameterError("active_count must not exceed N")
        if self.codebook not in ("auto", "explicit", "implicit"):
            raise ParameterError(f"codebook must be auto, explicit or implicit, got {self.codebook!r}")
        check_int(self.seed, "seed", 0)
        if self.n_active > self.n_users:
            raise ParameterError("derived N_a exceeds N; lower active_scale")

    # -- derived quantities

    @property
    def n_active(self) -> int:
        """Mean number of active users N_a."""
        return max(1, round(self.active_scale * self.n_users**self.beta))

    @property
    def n_msgs(self) -> int:
        if self.n_messages is not None:
            return self.n_messages
        if self.rate is not None:
            L, _ = self._mac_length()
            return max(1, round(2.0 ** (L * self.rate / self.n_users)))
        return max(1, round(self.message_scale * self.n_users**self.gamma))

    @property
    def log2_n(self) -> float:
        return math.log2(self.n_users)

    def _scaled_length(self, cost: float) -> int:
        L = math.ceil(cost * self.n_active * self.log2_n - 1e-9)
        if L < 1:
            raise ParameterError(f"derived L = {L} < 1; N must be at least 2")
        return L

    def _hashes_for(self, L: int) -> int:
        return max(1, round(L / self.n_active * LN2))

    def _mac_length(self) -> tuple[int, int]:
        if self.length is None:
            raise ParameterError("the fixed-N setting needs an explicit length L")
        K = self.n_hashes or max(1, round(self.kappa * self.length / self.n_users))
        return self.length, K

    def mac_params(self) -> tuple[int, int]:
        """(L, K) in the fixed-N setting."""
        return self._mac_length()

    def ar_params(self) -> tuple[int, int]:
        """(L, K) of the activity signatures."""
        L = self.length or self._scaled_length(self.omega_a)
        return L, self.n_hashes or self._hashes_for(L)

    def mt_params(self) -> tuple[int, int, int, int]:
        """(L1, K1, L2, K2) of the two-phase scheme."""
        L1 = self.length or self._scaled_length(self.kappa1)
        L2 = self.length2 or self._scaled_length(self.kappa2)
        return (L1, self.n_hashes or self._hashes_for(L1),
                L2, self.n_hashes2 or self._hashes_for(L2))

    def implicit_codebook(self) -> bool:
        if self.codebook == "auto":
            return self.n_msgs > EXPLICIT_MAX_MESSAGES
        return self.codebook == "implicit"

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ParameterError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**data)

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Codebook:
    """The M codewords of one user in one phase, as ordered hash sequences."""

    user: int
    phase: int
    L: int
    K: int
    positions: np.ndarray  # shape (M, K)

    @classmethod
    def generate(cls, seed: int, user: int, phase: int, M: int, L: int, K: int) -> "Codebook":
        keys = _hashing.identity_key(seed, user, phase, np.arange(M))
        pos = _hashing.to_range(_hashing.stream(keys[:, None], np.arange(K)[None, :]), L)
        pos.flags.writeable = False
        return cls(user, phase, L, K, pos)

    @property
    def M(self) -> int:
        return int(self.positions.shape[0])

    def filter(self, message: int) -> BloomFilter:
        return BloomFilter.from_positions(self.L, self.positions[message])

    @property
    def filters(self) -> list[BloomFilter]:
        return [self.filter(m) for m in range(self.M)]

    def hash_spec(self, seed: int, message: int) -> HashSpec:
        return HashSpec(seed, (self.user, self.phase, message))


@dataclass(frozen=True)
class ActivityPattern:
    """Which users are active and the message each active user sends."""

    active: frozenset
    messages: dict

    def __post_init__(self):
        if set(self.messages) != set(self.active):
            raise ParameterError("messages must be keyed exactly by the active users")

    @property
    def a(self) -> int:
        return len(self.active)

    def sorted_active(self) -> np.ndarray:
        return np.array(sorted(self.active), dtype=np.int64)


@dataclass(frozen=True)
class DecodeOutcome:
    declared_active: frozenset
    declared_messages: dict  # user -> message id, or AMBIGUOUS
    candidate_list_size: int = 0
    hash_count_total: int = 0
    contained: dict = field(default_factory=dict)  # user -> contained message ids

    def matches(self, pattern: ActivityPattern) -> bool:
        return (self.declared_active == pattern.active
                and all(self.declared_messages.get(u) == m for u, m in pattern.messages.items()))


# -- vectorized kernels

def codeword_positions(keys: np.ndarray, K: int, L: int) -> np.ndarray:
    """Hash sequences for an array of identity keys, shape keys.shape + (K,)."""
    keys = np.asarray(keys, dtype=np.uint64)
    return _hashing.to_range(_hashing.stream(keys[..., None], np.arange(K)), L)


def lazy_contains(y: np.ndarray, keys: np.ndarray, K: int) -> tuple[np.ndarray, np.ndarray]:
    """Containment of many codewords in one array, probing in hash order.

    Returns ``(contained, probes)`` per key, where ``probes`` counts positions
    inspected up to and including the first empty one.
    """
    keys = np.asarray(keys, dtype=np.uint64).ravel()
    L = y.size
    contained = np.ones(keys.size, dtype=bool)
    probes = np.zeros(keys.size, dtype=np.int64)
    alive = np.arange(keys.size)
    for k in range(K):
        if alive.size == 0:
            break
        pos = _hashing.to_range(_hashing.stream(keys[alive], k), L)
        probes[alive] += 1
        hit = y[pos]
        contained[alive[~hit]] = False
        alive = alive[hit]
    return contained, probes


def _or_positions(L: int, positions: np.ndarray) -> np.ndarray:
    bits = np.zeros(L, dtype=bool)
    bits[np.asarray(positions, dtype=np.int64).ravel()] = True
    return bits


# -- channel and activity

def or_channel(inputs: Sequence[BloomFilter], length: int | None = None) -> BloomFilter:
    """Positionwise OR of all inputs; an empty input list gives all zeros."""
    if not inputs:
        if length is None:
            raise ParameterError("length is required when there are no inputs")
        return BloomFilter.zeros(length)
    L = check_same_length(*(f.length for f in inputs))
    if length is not None:
        check_same_length(L, length)
    out = np.zeros(L, dtype=bool)
    for f in inputs:
        out |= f.bits
    return BloomFilter(out)


def draw_messages(seed, users: np.ndarray, M: int) -> np.ndarray:
    """Uniform message ids for ``users``; an array of seeds adds a leading axis."""
    key = _hashing.combine(seed, _hashing.TAG_MESSAGE)
    h = _hashing.stream(key[..., None], np.asarray(users)) if key.ndim else _hashing.stream(key, users)
    return _hashing.to_range(h, min(M, 1 << 62))


def sample_activity(scenario: Scenario, trial_seed: int | None = None) -> ActivityPattern:
    """Each user active independently w.p. N_a/N (or exactly ``active_count``
    users when set), each active user's message uniform on [0, M)."""
    seed = scenario.seed if trial_seed is None else int(trial_seed)
    N = scenario.n_users
    users = np.arange(N)
    u = _hashing.to_unit(_hashing.stream(_hashing.combine(seed, _hashing.TAG_ACTIVE), users))
    if scenario.active_count is not None:
        active = np.sort(np.argsort(u, kind="stable")[:scenario.active_count])
    else:
        active = np.flatnonzero(u < scenario.n_active / N)
    msgs = draw_messages(seed, active, scenario.n_msgs)
    return ActivityPattern(frozenset(int(x) for x in active),
                           {int(n): int(m) for n, m in zip(active, msgs)})


# -- fixed-N setting

def mac_codebooks(scenario: Scenario, seed: int | None = None) -> list[Codebook]:
    seed = scenario.seed if seed is None else int(seed)
    L, K = scenario.mac_params()
    return [Codebook.generate(seed, n, PHASE_MAC, scenario.n_msgs, L, K)
            for n in range(scenario.n_users)]


def mac_encode(codebooks: Sequence[Codebook], messages: Sequence[int]) -> BloomFilter:
    if len(messages) != len(codebooks):
        raise ParameterError("one message per user is required")
    return or_channel([cb.filter(m) for cb, m in zip(codebooks, messages)])


def decode_per_user(y: BloomFilter, codebooks: Sequence[Codebook]) -> DecodeOutcome:
    """Declare, for each user, the unique message whose codeword is contained
    in ``y``; a user with zero or several contained messages is ambiguous."""
    declared = {}
    contained_sets = {}
    hashes = 0
    for cb in codebooks:
        check_same_length(y.length, cb.L)
        found = []
        for m in range(cb.M):
            ok, probes = _contains_positions(y.bits, cb.positions[m])
            hashes += probes
            if ok:
                found.append(m)
        contained_sets[cb.user] = tuple(found)
        declared[cb.user] = found[0] if len(found) == 1 else AMBIGUOUS
    return DecodeOutcome(frozenset(declared), declared, 0, hashes, contained_sets)


def _contains_positions(bits: np.ndarray, positions: np.ndarray) -> tuple[bool, int]:
    hit = bits[positions]
    if hit.all():
        return True, int(positions.size)
    return False, int(np.argmin(hit)) + 1


def joint_decode(y: BloomFilter, codebooks: Sequence[Codebook],
                 guard: int = JOINT_GUARD) -> set[tuple[int, ...]]:
    """All message tuples whose superposition reproduces ``y`` exactly."""
    total = math.prod(cb.M for cb in codebooks)
    if total > guard:
        raise ResourceError(f"M^N = {total} exceeds the joint decoding guard {guard}")
    # only contained codewords can take part in an exact reproduction
    options = []
    for cb in codebooks:
        check_same_length(y.length, cb.L)
        bits = np.zeros((cb.M, cb.L), dtype=bool)
        np.put_along_axis(bits, cb.positions, True, axis=1)
        ok = ~(bits & ~y.bits).any(axis=1)
        options.append([(m, bits[m]) for m in np.flatnonzero(ok)])
    out = set()
    for combo in itertools.product(*options):
        acc = np.zeros(y.length, dtype=bool)
        for _, b in combo:
            acc |= b
        if np.array_equal(acc, y.bits):
            out.add(tuple(int(m) for m, _ in combo))
    return out


def mac_batch(seeds: np.ndarray, N: int, M: int, L: int, K: int) -> dict[str, np.ndarray]:
    """Per-user decoding for many trials at once with explicit codebooks.

    Row ``t`` is exactly what ``decode_per_user`` gives for trial seed
    ``seeds[t]`` with messages from :func:`draw_messages`.
    """
    seeds = np.asarray(seeds, dtype=np.uint64)
    T = seeds.size
    users = np.arange(N)
    msgs = draw_messages(seeds, users, M).reshape(T, N)
    keys = _hashing.identity_key(seeds[:, None, None], users[None, :, None], PHASE_MAC,
                                 np.arange(M)[None, None, :])
    pos = codeword_positions(keys, K, L)  # (T, N, M, K)
    sent = np.take_along_axis(pos, msgs[:, :, None, None], axis=2)[:, :, 0, :]
    y = np.zeros((T, L), dtype=bool)
    np.put_along_axis(y, sent.reshape(T, -1), True, axis=1)
    hit = np.take_along_axis(y[:, None, None, :], pos.reshape(T, 1, 1, -1), axis=3).reshape(pos.shape)
    contained = hit.all(axis=3)
    probes = np.where(contained, K, np.argmin(hit, axis=3) + 1)
    n_contained = contained.sum(axis=2)
    return {
        "success": (n_contained == 1).all(axis=1),
        "weight": y.sum(axis=1),
        "decode_hashes": probes.sum(axis=(1, 2)),
        "miss": ~np.take_along_axis(contained, msgs[:, :, None], axis=2).all(axis=(1, 2)),
    }


def mac_batch_implicit(seeds: np.ndarray, N: int, M: int, L: int, K: int) -> dict[str, np.ndarray]:
    """Per-user decoding when M is too large to enumerate.

    The transmitted codewords and the channel output are simulated exactly.
    The N(M-1) other codewords are independent of ``y``, each contained with
    probability (w/L)^K, so the event that none is contained is drawn from
    that exact conditional law instead of hashing every codeword.
    """
    seeds = np.asarray(seeds, dtype=np.uint64)
    T = seeds.size
    users = np.arange(N)
    msgs = draw_messages(seeds, users, M).reshape(T, N)
    keys = _hashing.identity_key(seeds[:, None], users[None, :], PHASE_MAC, msgs)
    pos = codeword_positions(keys, K, L)  # (T, N, K)
    y = np.zeros((T, L), dtype=bool)
    np.put_along_axis(y, pos.reshape(T, -1), True, axis=1)
    w = y.sum(axis=1)
    p_clear = np.exp(log_survival(false_alarm_prob(w, L, K), N * (float(M) - 1.0)))
    u = _hashing.to_unit(_hashing.stream(_hashing.combine(seeds, _hashing.TAG_DECISION), 0))
    return {
        "success": u < p_clear,
        "weight": w,
        "decode_hashes": np.full(T, N * K, dtype=np.int64),
        "miss": np.zeros(T, dtype=bool),
    }


# -- activity recognition

def _signature_keys(seed: int, users: np.ndarray, phase: int = PHASE_SIGNATURE) -> np.ndarray:
    return _hashing.identity_key(seed, users, phase, 0)


def ar_encode(scenario: Scenario, pattern: ActivityPattern, seed: int | None = None) -> BloomFilter:
    """OR of the active users' signatures."""
    seed = scenario.seed if seed is None else int(seed)
    L, K = scenario.ar_params()
    keys = _signature_keys(seed, pattern.sorted_active())
    return BloomFilter(_or_positions(L, codeword_positions(keys, K, L)))


def ar_decode(y: BloomFilter, scenario: Scenario, seed: int | None = None) -> DecodeOutcome:
    """Declare active every user whose signature is contained in ``y``."""
    seed = scenario.seed if seed is None else int(seed)
    L, K = scenario.ar_params()
    check_same_length(y.length, L)
    users = np.arange(scenario.n_users)
    contained, probes = lazy_contains(y.bits, _signature_keys(seed, users), K)
    declared = frozenset(int(u) for u in np.flatnonzero(contained))
    return DecodeOutcome(declared, {u: 0 for u in declared}, len(declared), int(probes.sum()))


# -- two-phase message transmission

def mt_encode(scenario: Scenario, pattern: ActivityPattern,
              seed: int | None = None) -> tuple[BloomFilter, BloomFilter]:
    """Phase 1 carries message-independent signatures, phase 2 the codewords."""
    seed = scenario.seed if seed is None else int(seed)
    L1, K1, L2, K2 = scenario.mt_params()
    active = pattern.sorted_active()
    keys1 = _signature_keys(seed, active)
    msgs = np.array([pattern.messages[int(u)] for u in active], dtype=np.int64)
    keys2 = _hashing.identity_key(seed, active, PHASE_MESSAGE, msgs)
    y1 = _or_positions(L1, codeword_positions(keys1, K1, L1))
    y2 = _or_positions(L2, codeword_positions(keys2, K2, L2))
    return BloomFilter(y1), BloomFilter(y2)


def mt_decode(y1: BloomFilter, y2: BloomFilter, scenario: Scenario,
              seed: int | None = None) -> DecodeOutcome:
    """Phase 1 lists candidate users by signature containment; phase 2 keeps a
    candidate with message m when m is its only contained codeword."""
    seed = scenario.seed if seed is None else int(seed)
    L1, K1, L2, K2 = scenario.mt_params()
    check_same_length(y1.length, L1)
    check_same_length(y2.length, L2)
    users = np.arange(scenario.n_users)
    cand_mask, probes1 = lazy_contains(y1.bits, _signature_keys(seed, users), K1)
    cands = np.flatnonzero(cand_mask)
    M = scenario.n_msgs
    keys2 = _hashing.identity_key(seed, cands[:, None], PHASE_MESSAGE, np.arange(M)[None, :])
    hit, probes2 = lazy_contains(y2.bits, keys2, K2)
    hit = hit.reshape(cands.size, M)
    declared = {}
    contained_sets = {}
    for row, u in enumerate(cands):
        found = np.flatnonzero(hit[row])
        contained_sets[int(u)] = tuple(int(m) for m in found)
        if found.size == 1:
            declared[int(u)] = int(found[0])
        elif found.size > 1:
            declared[int(u)] = AMBIGUOUS
    total = int(probes1.sum() + probes2.sum())
    return DecodeOutcome(frozenset(declared), declared, int(cands.size), total, contained_sets)


def classify_mt_error(pattern: ActivityPattern, outcome: DecodeOutcome) -> str | None:
    """Cause of a failed two-phase trial, or None on success.

    A missed active user (impossible on a noiseless channel) takes precedence,
    then an active user with a falsely contained message, then an inactive
    user accepted with at least one contained message.
    """
    for u in pattern.active:
        msgs = outcome.contained.get(u)
        if msgs is None or pattern.messages[u] not in msgs:
            return "phase1-miss"
    for u in pattern.active:
        if len(outcome.contained[u]) > 1:
            return "active-false-message"
    for u, msgs in outcome.contained.items():
        if u not in pattern.active and msgs:
            return "inactive-false-accept"
    return None

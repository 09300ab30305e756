"""Bloom filters as channel inputs: generation, superposition, containment and
the exact distribution of the number of set positions."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from . import _hashing
from .exceptions import DimensionError, ParameterError, ResourceError
from .validation import check_binary_array, check_int, check_real, check_same_length

MAX_LENGTH = 10**6
MAX_WORK = 5 * 10**9  # L * K multiply-adds for the occupancy recurrence


@dataclass(frozen=True)
class HashSpec:
    """Deterministic stand-in for the K random hash functions of one codeword.

    ``identity`` is ``(user, phase, message)``; the hash index is the position
    in the stream keyed by ``(master_seed, *identity)``.
    """

    master_seed: int
    identity: tuple[int, int, int] = (0, 0, 0)

    @property
    def key(self) -> int:
        return int(_hashing.identity_key(self.master_seed, *self.identity))

    def positions(self, length: int, n_hashes: int) -> np.ndarray:
        """Ordered hashed positions in [0, length), with replacement."""
        length = check_int(length, "L", 1)
        n_hashes = check_int(n_hashes, "K", 0)
        return _hashing.to_range(_hashing.stream(self.key, np.arange(n_hashes)), length)


@dataclass(frozen=True, eq=False)
class BloomFilter:
    """A length-L binary array, optionally remembering the hash sequence that
    produced it (needed for early-exit containment)."""

    bits: np.ndarray
    positions: tuple[int, ...] | None = field(default=None)

    def __post_init__(self):
        bits = check_binary_array(self.bits, "bits").copy()
        if bits.size == 0:
            raise ParameterError("a Bloom filter needs length >= 1")
        bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)
        if self.positions is not None:
            pos = tuple(int(p) for p in self.positions)
            if any(p < 0 or p >= bits.size for p in pos):
                raise ParameterError("hash position outside [0, L)")
            object.__setattr__(self, "positions", pos)

    @property
    def length(self) -> int:
        return int(self.bits.size)

    @classmethod
    def zeros(cls, length: int) -> "BloomFilter":
        return cls(np.zeros(check_int(length, "L", 1), dtype=bool), positions=())

    @classmethod
    def from_positions(cls, length: int, positions: Sequence[int]) -> "BloomFilter":
        length = check_int(length, "L", 1)
        bits = np.zeros(length, dtype=bool)
        pos = np.asarray(positions, dtype=np.int64)
        if pos.size and (pos.min() < 0 or pos.max() >= length):
            raise ParameterError("hash position outside [0, L)")
        bits[pos] = True
        return cls(bits, positions=tuple(int(p) for p in pos))

    @classmethod
    def from_string(cls, text: str) -> "BloomFilter":
        """``"1011"`` sets positions 0, 2 and 3."""
        if not text or set(text) - {"0", "1"}:
            raise ParameterError(f"not a bit string: {text!r}")
        return cls(np.frombuffer(text.encode(), dtype=np.uint8) == ord("1"))

    def probe_order(self) -> tuple[int, ...]:
        if self.positions is not None:
            return self.positions
        return tuple(int(p) for p in np.flatnonzero(self.bits))

    def __str__(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)

    def __repr__(self) -> str:
        return f"BloomFilter('{self}')"

    def __eq__(self, other) -> bool:
        if not isinstance(other, BloomFilter):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    def __hash__(self) -> int:
        return hash(self.bits.tobytes())

    def __or__(self, other: "BloomFilter") -> "BloomFilter":
        return superpose(self, other)


def generate(length: int, n_hashes: int, hash_spec: HashSpec) -> BloomFilter:
    """BF(L, K): set each of the K hashed positions; duplicates collapse."""
    length = check_int(length, "L", 1)
    n_hashes = check_int(n_hashes, "K", 1)
    return BloomFilter.from_positions(length, hash_spec.positions(length, n_hashes))


def superpose(a: BloomFilter, b: BloomFilter) -> BloomFilter:
    check_same_length(a.length, b.length)
    return BloomFilter(a.bits | b.bits)


def contains(array: BloomFilter, filt: BloomFilter | Sequence[int]) -> tuple[bool, int]:
    """Check whether every hashed position of ``filt`` is set in ``array``.

    Probes positions in hash order and stops at the first miss; the second
    element of the result is the number of positions inspected.
    """
    if isinstance(filt, BloomFilter):
        check_same_length(array.length, filt.length)
        order = filt.probe_order()
    else:
        order = tuple(int(p) for p in filt)
        if any(p < 0 or p >= array.length for p in order):
            raise DimensionError("probe position outside the array")
    bits = array.bits
    for checked, pos in enumerate(order, start=1):
        if not bits[pos]:
            return False, checked
    return True, len(order)


def weight(f: BloomFilter) -> int:
    return int(np.count_nonzero(f.bits))


@dataclass(frozen=True)
class WeightPmf:
    """Exact law of the number of ones in BF(L, K); ``probs[w]`` is Pr[weight = w]."""

    L: int
    K: int
    probs: np.ndarray

    @property
    def pmf(self) -> dict[int, float]:
        return {int(w): float(p) for w, p in enumerate(self.probs) if p > 0.0}

    def __getitem__(self, w: int) -> float:
        return float(self.probs[w]) if 0 <= w < self.probs.size else 0.0

    def mean(self) -> float:
        return float(np.dot(np.arange(self.probs.size), self.probs))

    def to_csv(self, fh=None) -> str | None:
        """Write ``w,probability`` rows; returns the text when no handle is given."""
        own = fh is None
        out = io.StringIO() if own else fh
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["w", "probability"])
        for w, p in self.pmf.items():
            writer.writerow([w, repr(p)])
        return out.getvalue() if own else None


def _check_work(length: int, n_hashes: int) -> None:
    if length > MAX_LENGTH:
        raise ResourceError(f"L={length} exceeds the exact-computation guard {MAX_LENGTH}")
    if length * n_hashes > MAX_WORK:
        raise ResourceError(f"L*K={length * n_hashes} exceeds the exact-computation guard {MAX_WORK}")


def _occupancy_step(probs: np.ndarray, length: int, w: np.ndarray) -> np.ndarray:
    # one more hash: stays on an occupied position w.p. w/L, else occupies a new one
    nxt = probs * (w / length)
    nxt[1:] += probs[:-1] * ((length - w[1:] + 1) / length)
    return nxt


def weight_pmf_ladder(length: int, step: int, n_steps: int) -> np.ndarray:
    """Weight laws after 0, step, 2*step, ..., n_steps*step hashes, as rows."""
    length = check_int(length, "L", 1)
    step = check_int(step, "step", 0)
    n_steps = check_int(n_steps, "n_steps", 0)
    _check_work(length, step * n_steps)
    w = np.arange(length + 1, dtype=np.float64)
    probs = np.zeros(length + 1)
    probs[0] = 1.0
    rows = np.empty((n_steps + 1, length + 1))
    rows[0] = probs
    for j in range(1, n_steps + 1):
        for _ in range(step):
            probs = _occupancy_step(probs, length, w)
        rows[j] = probs
    return rows


def weight_pmf(length: int, n_hashes: int) -> WeightPmf:
    """Exact weight law of BF(L, K) by the occupancy recurrence."""
    length = check_int(length, "L", 1)
    n_hashes = check_int(n_hashes, "K", 0)
    _check_work(length, n_hashes)
    top = min(n_hashes, length)
    w = np.arange(top + 1, dtype=np.float64)
    probs = np.zeros(top + 1)
    probs[0] = 1.0
    for _ in range(n_hashes):
        probs = _occupancy_step(probs, length, w)
    return WeightPmf(length, n_hashes, probs)


_STIRLING_ROWS: list[tuple[int, ...]] = [(1,)]


def _stirling_row(k: int) -> tuple[int, ...]:
    while len(_STIRLING_ROWS) <= k:
        prev = _STIRLING_ROWS[-1]
        n = len(prev)
        row = [0] * (n + 1)
        for w in range(1, n + 1):
            row[w] = (w * prev[w] if w < n else 0) + prev[w - 1]
        _STIRLING_ROWS.append(tuple(row))
    return _STIRLING_ROWS[k]


def stirling2(k: int, w: int) -> int:
    """Stirling number of the second kind S(k, w), exact; 0 when w > k."""
    k = check_int(k, "K", 0)
    w = check_int(w, "w", 0)
    if w > k:
        return 0
    if k > 2000:
        raise ResourceError("stirling2 is meant for small cross-checks (K <= 2000)")
    return _stirling_row(k)[w]


def weight_pmf_closed_form(length: int, n_hashes: int) -> dict[int, Fraction]:
    """Pr[w] = C(L, w) w! S(K, w) / L^K as exact rationals."""
    length = check_int(length, "L", 1)
    n_hashes = check_int(n_hashes, "K", 0)
    denom = length**n_hashes
    out = {}
    for w in range(min(n_hashes, length) + 1):
        num = math.comb(length, w) * math.factorial(w) * stirling2(n_hashes, w)
        if num:
            out[w] = Fraction(num, denom)
    return out


class OccupancyBound(NamedTuple):
    bound: float  # clamped to [0, 1]
    raw: float
    p: float  # expected fraction of zeros, (1 - 1/L)^K


def occupancy_bound(length: int, n_hashes: int, eps: float) -> OccupancyBound:
    """Azuma bound on Pr[|z - pL| > eps L] for the zero count z of BF(L, K)."""
    length = check_int(length, "L", 1)
    n_hashes = check_int(n_hashes, "K", 1)
    eps = check_real(eps, "eps", 0.0, 1.0, low_open=True, high_open=True)
    raw = 2.0 * math.exp(-(eps * length) ** 2 / (2.0 * n_hashes))
    p = math.exp(n_hashes * math.log1p(-1.0 / length)) if length > 1 else 0.0
    return OccupancyBound(min(raw, 1.0), raw, p)


def conditional_occupancy_bound(length: int, n_hashes2: int, eps: float) -> OccupancyBound:
    """Bound on Pr[|z - p2 z1| > eps L | first filter] after adding K2 more hashes."""
    return occupancy_bound(length, n_hashes2, eps)


def sample_positions(length: int, n_hashes: int, seed: int, n_samples: int,
                     phase: int = 0, message: int = 0) -> np.ndarray:
    """Hash sequences of ``n_samples`` independent filters, shape (n, K).

    Sample ``i`` is the filter of identity ``(i, phase, message)`` under
    ``seed``, i.e. ``generate(L, K, HashSpec(seed, (i, phase, message)))``.
    """
    keys = _hashing.identity_key(seed, np.arange(n_samples), phase, message)
    h = _hashing.stream(keys[:, None], np.arange(n_hashes)[None, :])
    return _hashing.to_range(h, length)


def bits_from_positions(positions: np.ndarray, length: int) -> np.ndarray:
    """Rows of hashed positions to rows of bits, shape (n, L)."""
    positions = np.atleast_2d(positions)
    bits = np.zeros((positions.shape[0], length), dtype=bool)
    np.put_along_axis(bits, positions, True, axis=1)
    return bits

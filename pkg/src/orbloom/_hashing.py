"""Counter-based keyed hashing used for every random choice in the package.

All positions, activity draws, message draws and trial seeds come from a
splitmix64 stream keyed by integers, so a codebook can be regenerated from
(seed, user, phase, message) alone and results are identical across runs,
platforms and execution orders.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_C1 = 0xBF58476D1CE4E5B9
_C2 = 0x94D049BB133111EB

_U_GOLDEN = np.uint64(GOLDEN)
_U_C1 = np.uint64(_C1)
_U_C2 = np.uint64(_C2)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)

# stream tags for non-position draws
TAG_TRIAL = 0x7472
TAG_ACTIVE = 0x6163
TAG_MESSAGE = 0x6D73
TAG_DECISION = 0x6463


def mix64_int(z: int) -> int:
    """Scalar splitmix64 finalizer on Python ints (reference path)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _C1) & MASK64
    z = ((z ^ (z >> 27)) * _C2) & MASK64
    return z ^ (z >> 31)


def _as_u64(x) -> np.ndarray:
    if isinstance(x, int):
        return np.asarray(x & MASK64, dtype=np.uint64)
    arr = np.asarray(x)
    if arr.dtype == np.uint64:
        return arr
    if arr.dtype.kind in "iu":
        return arr.astype(np.uint64)
    raise TypeError(f"cannot hash values of dtype {arr.dtype}")


def mix64(z) -> np.ndarray:
    """Vectorized splitmix64 finalizer; wraps modulo 2**64."""
    z = np.array(_as_u64(z), dtype=np.uint64, copy=True)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _U_C1
        z = (z ^ (z >> _S27)) * _U_C2
        z = z ^ (z >> _S31)
    return z


def combine(key, value) -> np.ndarray:
    """Fold ``value`` into ``key``; order-sensitive."""
    with np.errstate(over="ignore"):
        return mix64(_as_u64(key) ^ mix64(_as_u64(value) + _U_GOLDEN))


def identity_key(seed, user, phase, message) -> np.ndarray:
    """Stream key for one codeword identity. Broadcasts over array inputs."""
    k = mix64(_as_u64(seed))
    k = combine(k, user)
    k = combine(k, phase)
    return combine(k, message)


def stream(key, index) -> np.ndarray:
    """The ``index``-th output of the splitmix64 stream started at ``key``."""
    with np.errstate(over="ignore"):
        counter = (_as_u64(index) + np.uint64(1)) * _U_GOLDEN
        return mix64(_as_u64(key) + counter)


def to_range(h, n: int) -> np.ndarray:
    """Map 64-bit hashes to [0, n). Modulo bias is below n / 2**64."""
    return (np.asarray(h, dtype=np.uint64) % np.uint64(n)).astype(np.int64)


def to_unit(h) -> np.ndarray:
    """Map 64-bit hashes to floats uniform on [0, 1) with 53-bit resolution."""
    return (np.asarray(h, dtype=np.uint64) >> _S11).astype(np.float64) * (2.0**-53)


def trial_seed(master_seed: int, index) -> np.ndarray:
    """Per-trial seed derived from (master_seed, trial index)."""
    return combine(combine(master_seed, TAG_TRIAL), index)


# reference implementation on Python ints, kept independent of the numpy path

def _combine_int(key: int, value: int) -> int:
    return mix64_int(key ^ mix64_int(value + GOLDEN))


def identity_key_int(seed: int, user: int, phase: int, message: int) -> int:
    k = mix64_int(seed)
    for v in (user, phase, message):
        k = _combine_int(k, v & MASK64)
    return k


def stream_int(key: int, index: int) -> int:
    return mix64_int(key + ((index + 1) * GOLDEN & MASK64))

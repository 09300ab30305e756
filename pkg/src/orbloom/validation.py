"""Input validation helpers shared by the public functions and estimators."""

from __future__ import annotations

import math
import numbers

import numpy as np

from .exceptions import DimensionError, DomainError, ParameterError


def check_int(value, name: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        else:
            raise ParameterError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < minimum:
        raise ParameterError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_real(value, name: str, low: float | None = None, high: float | None = None,
               low_open: bool = False, high_open: bool = False) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise DomainError(f"{name} must be a real number, got {value!r}") from None
    if math.isnan(x):
        raise DomainError(f"{name} is NaN")
    bad_low = low is not None and (x <= low if low_open else x < low)
    bad_high = high is not None and (x >= high if high_open else x > high)
    if bad_low or bad_high:
        lb = "(" if low_open else "["
        rb = ")" if high_open else "]"
        lo = "-inf" if low is None else f"{low:g}"
        hi = "inf" if high is None else f"{high:g}"
        raise DomainError(f"{name} out of {lb}{lo},{hi}{rb}: {x!r}")
    return x


def check_positive(value, name: str) -> float:
    return check_real(value, name, low=0.0, low_open=True)


def check_unit_open(value, name: str) -> float:
    """Reals strictly between 0 and 1, e.g. the activity exponent."""
    return check_real(value, name, low=0.0, high=1.0, low_open=True, high_open=True)


def check_binary_array(bits, name: str = "array") -> np.ndarray:
    arr = np.asarray(bits)
    if arr.ndim != 1:
        raise ParameterError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.dtype != bool:
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise ParameterError(f"{name} must be binary")
        arr = arr.astype(bool)
    return arr


def check_same_length(*lengths: int) -> int:
    if len(set(lengths)) > 1:
        raise DimensionError(f"length mismatch: {sorted(set(lengths))}")
    return lengths[0]

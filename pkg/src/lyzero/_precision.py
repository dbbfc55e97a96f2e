"""Numeric backends: float64 arrays, or object arrays of mpmath numbers."""

from __future__ import annotations

import contextlib
import math
import threading

import mpmath
import numpy as np

DOUBLE = "double"
EXTENDED = "extended"
PRECISIONS = (DOUBLE, EXTENDED)

# decimal digits used whenever extended precision is requested
EXTENDED_DPS = 50

_mp_exp = np.frompyfunc(mpmath.exp, 1, 1)
_mp_mpf = np.frompyfunc(mpmath.mpf, 1, 1)


# mpmath precision is global state; extended sections hold this lock so
# concurrent scans cannot reset each other's working precision
_MP_LOCK = threading.RLock()


@contextlib.contextmanager
def working(precision: str = EXTENDED):
    """Run mpmath arithmetic at :data:`EXTENDED_DPS`; a no-op for doubles."""
    if precision != EXTENDED:
        yield
        return
    with _MP_LOCK, mpmath.workdps(EXTENDED_DPS):
        yield


def check_precision(precision: str) -> str:
    if precision not in PRECISIONS:
        raise ValueError(f"precision must be one of {PRECISIONS}, got {precision!r}")
    return precision


def asarray(values, precision: str = DOUBLE) -> np.ndarray:
    arr = np.asarray(values)
    if precision == EXTENDED:
        if arr.dtype == object:
            return _mp_mpf(arr).astype(object)
        return _mp_mpf(arr.astype(float)).astype(object)
    return arr.astype(float)


def exp(values: np.ndarray, precision: str = DOUBLE) -> np.ndarray:
    if precision == EXTENDED:
        return _mp_exp(np.asarray(values, dtype=object)).astype(object)
    return np.exp(values)


def scalar_exp(x, precision: str = DOUBLE):
    return mpmath.exp(x) if precision == EXTENDED else math.exp(x)


def to_float(values: np.ndarray) -> np.ndarray:
    return np.array([float(v) for v in np.ravel(values)]).reshape(np.shape(values))

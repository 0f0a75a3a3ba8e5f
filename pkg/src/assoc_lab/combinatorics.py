"""Exact counting kernels: falling factorials, binomials, log-binomials.

Results are checked against a 128-bit width; anything wider raises
CountOverflowError and points the caller at the log-space alternative
instead of silently degrading.
"""

from __future__ import annotations

import math

from .errors import CountOverflowError, InvalidParameterError

COUNT_MAX = (1 << 128) - 1


def _checked(value: int, what: str) -> int:
    if value > COUNT_MAX:
        raise CountOverflowError(
            f"{what} exceeds the 128-bit count width; use a log-space path"
        )
    return value


def falling_factorial(m: int, k: int) -> int:
    """m*(m-1)*...*(m-k+1); 0 when m < k, 1 when k == 0."""
    if m < 0 or k < 0:
        raise InvalidParameterError("falling_factorial needs nonnegative arguments")
    if k == 0:
        return 1
    if m < k:
        return 0
    out = 1
    for j in range(m, m - k, -1):
        out *= j
    return _checked(out, f"falling_factorial({m}, {k})")


def binomial(a: int, b: int) -> int:
    """C(a, b) by the multiplicative formula with exact intermediate division."""
    if a < 0 or b < 0:
        raise InvalidParameterError("binomial needs nonnegative arguments")
    if b > a:
        return 0
    b = min(b, a - b)
    out = 1
    for i in range(1, b + 1):
        out = out * (a - b + i) // i
    return _checked(out, f"binomial({a}, {b})")


def log_binomial(a: int, b: int) -> float:
    """ln C(a, b) via log-gamma; requires b <= a."""
    if a < 0 or b < 0:
        raise InvalidParameterError("log_binomial needs nonnegative arguments")
    if b > a:
        raise InvalidParameterError("log_binomial requires b <= a")
    return math.lgamma(a + 1) - math.lgamma(b + 1) - math.lgamma(a - b + 1)

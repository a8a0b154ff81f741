"""Exact dyadic-rational helpers used by every module.

All grid endpoints are stored as :class:`fractions.Fraction` and validated
here. A scale is always written delta = 2**-m; the integer m is the only
scale handle passed around.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational

from .errors import DomainError, InvalidScaleError

__all__ = [
    "as_fraction",
    "is_dyadic",
    "check_scale",
    "delta_of",
    "cell_count",
    "floor_to_scale",
    "ceil_to_scale",
]


def as_fraction(x) -> Fraction:
    """Coerce ints, Fractions and numeric strings to Fraction.

    Floats are rejected: callers must pass exact endpoints.
    """
    if isinstance(x, float):
        raise DomainError(f"endpoint {x!r} is a float; pass an exact rational")
    if isinstance(x, Rational):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise DomainError(f"cannot interpret {x!r} as an exact rational")


def is_dyadic(x: Fraction) -> bool:
    """True iff x = p / 2**k for integers p, k >= 0."""
    q = x.denominator
    return q & (q - 1) == 0


def check_scale(m: int) -> int:
    if not isinstance(m, int) or isinstance(m, bool) or m < 1:
        raise InvalidScaleError(f"scale exponent must be an integer >= 1, got {m!r}")
    return m


def delta_of(m: int) -> Fraction:
    check_scale(m)
    return Fraction(1, 2**m)


def cell_count(lo: Fraction, hi: Fraction, m: int) -> int:
    """Number of delta-cells in [lo, hi); validates alignment of the width."""
    check_scale(m)
    if not (is_dyadic(lo) and is_dyadic(hi)):
        raise DomainError(f"endpoints ({lo}, {hi}) must be dyadic rationals")
    if hi <= lo:
        raise DomainError(f"need lo < hi, got ({lo}, {hi})")
    n = (hi - lo) * 2**m
    if n.denominator != 1:
        raise DomainError(f"width {hi - lo} is not a multiple of 2**-{m}")
    return int(n)


def floor_to_scale(x: Fraction, m: int) -> Fraction:
    """Largest multiple of 2**-m that is <= x."""
    scaled = x * 2**m
    return Fraction(scaled.numerator // scaled.denominator, 2**m)


def ceil_to_scale(x: Fraction, m: int) -> Fraction:
    """Smallest multiple of 2**-m that is >= x."""
    scaled = x * 2**m
    return Fraction(-((-scaled.numerator) // scaled.denominator), 2**m)

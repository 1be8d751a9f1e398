"""Exact continued-fraction arithmetic and closed-form Gauss measures.

Everything here works on :class:`fractions.Fraction` values, so results are
exact.  Measures of intervals are kept as ``log(r)/log 2`` with ``r`` rational;
two measures are compared through their ratios, never through decimals.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence, Tuple

import mpmath

DigitString = Tuple[int, ...]

DEFAULT_DIGITS = 50


class DomainError(ValueError):
    """Argument outside the domain of an operation."""


def as_digits(digits: Iterable[int]) -> DigitString:
    """Validate and freeze a digit string (every digit a positive integer)."""
    out = tuple(int(d) for d in digits)
    for i, d in enumerate(out):
        if d < 1:
            raise DomainError(f"digit {i} is {d}; continued-fraction digits must be >= 1")
    return out


def _fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"expected an exact rational, got {type(x).__name__}")


# --------------------------------------------------------------------------
# expansions and the Gauss map

def cf_expand(x) -> DigitString:
    """Continued-fraction digits of a rational ``0 < x < 1``.

    The canonical expansion is returned: the last digit is at least 2
    (``1/1`` is excluded by the domain, so this always exists).

    >>> cf_expand(Fraction(5, 7))
    (1, 2, 2)
    """
    x = _fraction(x)
    if not 0 < x < 1:
        raise DomainError(f"cf_expand needs 0 < x < 1, got {x}")
    num, den = x.numerator, x.denominator
    digits = []
    # Euclid on den/num; the last quotient is >= 2 whenever x < 1
    while num:
        a, r = divmod(den, num)
        digits.append(a)
        den, num = num, r
    return tuple(digits)


def cf_value(digits: Sequence[int]) -> Fraction:
    """Evaluate ``<a_1, ..., a_n>`` exactly (the empty string is 0)."""
    state = convergents(digits)
    return Fraction(state.p_cur, state.q_cur)


def gauss_map(x) -> Fraction:
    """``T x = 1/x - floor(1/x)``, with ``T 0 = 0``."""
    x = _fraction(x)
    if not 0 <= x < 1:
        raise DomainError(f"gauss_map needs 0 <= x < 1, got {x}")
    if x == 0:
        return Fraction(0)
    inv = 1 / x
    return inv - (inv.numerator // inv.denominator)


# --------------------------------------------------------------------------
# convergents

@dataclass(frozen=True)
class ConvergentState:
    """Two consecutive convergents ``p_prev/q_prev`` and ``p_cur/q_cur``."""

    p_prev: int = 1
    q_prev: int = 0
    p_cur: int = 0
    q_cur: int = 1

    @property
    def value(self) -> Fraction:
        return Fraction(self.p_cur, self.q_cur)

    @property
    def determinant(self) -> int:
        return self.p_prev * self.q_cur - self.p_cur * self.q_prev


INITIAL_STATE = ConvergentState()


def push_digit(state: ConvergentState, a: int) -> ConvergentState:
    """Advance the convergent recurrence by one digit ``a >= 1``."""
    if a < 1:
        raise DomainError(f"digit must be >= 1, got {a}")
    return ConvergentState(
        state.p_cur, state.q_cur,
        a * state.p_cur + state.p_prev,
        a * state.q_cur + state.q_prev,
    )


def convergents(digits: Iterable[int]) -> ConvergentState:
    state = INITIAL_STATE
    for a in digits:
        state = push_digit(state, a)
    return state


# --------------------------------------------------------------------------
# cylinders

@dataclass(frozen=True)
class Cylinder:
    """Rank-``n`` cylinder set ``C_s`` with exact endpoints ``lo < hi``."""

    string: DigitString
    lo: Fraction
    hi: Fraction

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def contains(self, x) -> bool:
        x = _fraction(x)
        return self.lo <= x <= self.hi

    def measure(self) -> "ExactMeasure":
        return gauss_measure_interval(self.lo, self.hi)


def cylinder(s: Iterable[int]) -> Cylinder:
    """Cylinder of all ``x`` whose expansion starts with ``s``.

    The empty string gives the whole of ``[0, 1)``.
    """
    s = as_digits(s)
    if not s:
        return Cylinder(s, Fraction(0), Fraction(1))
    st = convergents(s)
    a = Fraction(st.p_cur, st.q_cur)
    b = Fraction(st.p_cur + st.p_prev, st.q_cur + st.q_prev)
    lo, hi = (a, b) if a < b else (b, a)
    return Cylinder(s, lo, hi)


# --------------------------------------------------------------------------
# exact measures

@dataclass(frozen=True)
class ExactMeasure:
    """Gauss measure ``log(ratio)/log 2`` with an exact rational ratio ``>= 1``."""

    ratio: Fraction

    def __post_init__(self):
        if not isinstance(self.ratio, Fraction):
            object.__setattr__(self, "ratio", _fraction(self.ratio))
        if self.ratio < 1:
            raise DomainError(f"measure ratio must be >= 1, got {self.ratio}")

    def mpf(self, digits: int = DEFAULT_DIGITS):
        with mpmath.workdps(digits + 10):
            r = self.ratio
            return mpmath.log(mpmath.mpf(r.numerator) / r.denominator) / mpmath.log(2)

    def decimal(self, digits: int = DEFAULT_DIGITS) -> str:
        """Decimal rendering to ``digits`` significant digits."""
        with mpmath.workdps(digits + 10):
            return mpmath.nstr(self.mpf(digits), digits, strip_zeros=False)

    @property
    def value(self):
        return self.mpf()

    def __float__(self) -> float:
        return float(self.mpf(20))

    def __add__(self, other: "ExactMeasure") -> "ExactMeasure":
        if not isinstance(other, ExactMeasure):
            return NotImplemented
        return ExactMeasure(self.ratio * other.ratio)

    # exact ordering through the ratios
    def __lt__(self, other: "ExactMeasure") -> bool:
        return self.ratio < other.ratio

    def __le__(self, other: "ExactMeasure") -> bool:
        return self.ratio <= other.ratio

    def __gt__(self, other: "ExactMeasure") -> bool:
        return self.ratio > other.ratio

    def __ge__(self, other: "ExactMeasure") -> bool:
        return self.ratio >= other.ratio


ZERO = ExactMeasure(Fraction(1))


def gauss_measure_interval(lo, hi) -> ExactMeasure:
    """Gauss measure of ``[lo, hi]``: ratio ``(1 + hi)/(1 + lo)``."""
    lo, hi = _fraction(lo), _fraction(hi)
    if not 0 <= lo < hi <= 1:
        raise DomainError(f"need 0 <= lo < hi <= 1, got [{lo}, {hi}]")
    return ExactMeasure((1 + hi) / (1 + lo))


def measure_sum(terms: Iterable[ExactMeasure]) -> ExactMeasure:
    """Exact sum of measures (product of their ratios)."""
    ratios = [t.ratio for t in terms]
    if not ratios:
        return ZERO
    return ExactMeasure(_product_tree(ratios))


def _product_tree(values):
    # balanced products keep operand sizes even
    while len(values) > 1:
        values = [values[i] * values[i + 1] if i + 1 < len(values) else values[i]
                  for i in range(0, len(values), 2)]
    return values[0]


def cylinder_measure(s: Iterable[int]) -> ExactMeasure:
    return cylinder(s).measure()


# frequently used constants
MU_A = gauss_measure_interval(Fraction(1, 2), 1)              # log(4/3)/log 2
MU_E1 = cylinder_measure((1, 1))                              # log(10/9)/log 2

"""Certified and high-precision values of ``mu(E_n)``, ``E_n = A n T^-n A``.

Two independent routes:

* :func:`en_exact` enumerates the cylinders ``[1, d_2, ..., d_n, 1]`` with
  interior digits up to ``D`` and bounds the unenumerated remainder
  rigorously.  Everything is rational; the running products of measure
  ratios are kept as dyadic numbers ``m / 2^256`` rounded outward, so the
  lower and upper ratios stay certified while their size stays bounded.
* :func:`en_refined` iterates the cumulative functions
  ``psi_r(s) = log 2 * mu([0, s] n T^-(r+1) A)`` through
  ``psi_r(s) = sum_d psi_{r-1}(1/d) - psi_{r-1}(1/(d+s))`` with Chebyshev
  interpolation.  Its error bar is an estimate from two resolutions.
"""
from __future__ import annotations

import itertools
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from numpy.polynomial import Chebyshev
from scipy.special import digamma, zeta

from ._backend import thread_cap
from .core import MU_E1, DomainError, ExactMeasure, cylinder_measure, measure_sum

log = logging.getLogger(__name__)

SCALE_BITS = 256
GUARD_BITS = 40
LN2 = math.log(2.0)


class ResourceError(RuntimeError):
    """Enumeration would exceed the combinatorial guard."""


@dataclass(frozen=True)
class MeasureInterval:
    """``lower <= mu(E_n) <= upper`` with both ends as exact measures."""

    n: int
    lower: ExactMeasure
    upper: ExactMeasure
    method: str
    D: Optional[int] = None
    certified: bool = True

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError("lower end above upper end")

    @property
    def lo(self) -> float:
        return float(self.lower.mpf(30))

    @property
    def hi(self) -> float:
        return float(self.upper.mpf(30))

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def width(self) -> float:
        return float(self.upper.mpf(40) - self.lower.mpf(40))

    def contains(self, other: "MeasureInterval") -> bool:
        return self.lower <= other.lower and other.upper <= self.upper

    def contains_value(self, v: float, slack: float = 0.0) -> bool:
        return self.lo - slack <= v <= self.hi + slack


# --------------------------------------------------------------------------
# rigorous enumeration

def _log43_bounds(terms: int = 40) -> Tuple[Fraction, Fraction]:
    # log(4/3) = 2 atanh(1/7)
    x = Fraction(1, 7)
    s = sum(x ** (2 * i + 1) / (2 * i + 1) for i in range(terms))
    tail = x ** (2 * terms + 1) / ((2 * terms + 1) * (1 - x * x))
    return 2 * s, 2 * (s + tail)


LOG43_LO, LOG43_HI = _log43_bounds()


def _lebesgue_tail(r: int, D: int) -> Tuple[Fraction, Fraction]:
    """Bounds on the Lebesgue measure of ``{y: a_1(y) > D, a_{r+1}(y) = 1}``."""
    if r == 1:
        return Fraction(1, 2 * D + 3), Fraction(1, 2 * (D + 1))
    # sum_{k>D} (k+z)^-2 lies in [1/(D+2), 1/D]; Lebesgue(T^-(r-1) A) lies in
    # [log(4/3), 2 log(4/3)] because the Gauss density is in [1/(2 ln2), 1/ln2]
    return LOG43_LO / (D + 2), 2 * LOG43_HI / D


def _tail_factors(pp, qp, p, q, D, lam):
    """Ratio bounds for the part of ``C_prefix`` whose next digit exceeds ``D``."""
    x0 = Fraction(p, q)
    x1 = Fraction((D + 1) * p + pp, (D + 1) * q + qp)
    a, b = (x0, x1) if x0 < x1 else (x1, x0)
    w = (1 + b) / (1 + a) - 1
    t = Fraction(qp, q)
    u = Fraction(pp + qp, p + q)
    rho_min = 1 / ((1 + t / (D + 1)) * (1 + u / (D + 1)))
    c_lo = max(Fraction(0), rho_min * (D + 1) * lam[0])
    c_hi = min(Fraction(1), (D + 1) * lam[1] / rho_min)
    # (1+w)^c is squeezed between 1 + c w/(1+w) and 1 + c w for 0 <= c <= 1
    return 1 + c_lo * w / (1 + w), 1 + c_hi * w


def _mul_down(m, f: Fraction):
    return m * f.numerator // f.denominator


def _mul_up(m, f: Fraction):
    return -((-m * f.numerator) // f.denominator)


def _leaf_products(pp, qp, p, q, D, lo, hi):
    """Multiply in the cylinders ``[prefix, d, 1]`` for ``d = 1..D``."""
    for d in range(1, D + 1):
        P1, Q1 = p, q
        P, Q = d * p + pp, d * q + qp
        p2, q2 = P + P1, Q + Q1          # push the closing digit 1
        a = p2 + q2                        # 1 + p2/q2 = a/q2
        b = p2 + P + q2 + Q                # 1 + (p2+P)/(q2+Q) = b/(q2+Q)
        num, den = a * (q2 + Q), q2 * b
        if num < den:
            num, den = den, num
        lo = lo * num // den
        hi = -((-hi * num) // den)
    return lo, hi


def _subtree(args):
    """Dyadic ``(lo, hi)`` products for the subtree below one prefix."""
    n, j, D, state, lams = args
    one = 1 << SCALE_BITS
    lo = hi = one
    pp, qp, p, q = state
    f_lo, f_hi = _tail_factors(pp, qp, p, q, D, lams[n - j])
    lo, hi = _mul_down(lo, f_lo), _mul_up(hi, f_hi)
    if j == n - 1:
        return _leaf_products(pp, qp, p, q, D, lo, hi)
    for d in range(1, D + 1):
        sl, sh = _subtree((n, j + 1, D, (p, q, d * p + pp, d * q + qp), lams))
        lo = lo * sl >> SCALE_BITS
        hi = -((-hi * sh) >> SCALE_BITS)
    return lo, hi


def check_guard(n: int, D: int) -> None:
    if D < 1:
        raise DomainError(f"digit cutoff must be >= 1, got {D}")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if n > 1 and (n - 1) * math.log2(D) > GUARD_BITS:
        raise ResourceError(
            f"(n-1)*log2(D) = {(n - 1) * math.log2(D):.2f} exceeds {GUARD_BITS} "
            f"for n={n}, D={D}")


def en_exact(n: int, D: int, threads: Optional[int] = None) -> MeasureInterval:
    """Certified interval for ``mu(E_n)`` from interior digits ``<= D``.

    The result does not depend on ``threads``: work is split by the first
    interior digit and partial products are combined in digit order.
    """
    check_guard(n, D)
    if n == 1:
        m = cylinder_measure((1, 1))
        return MeasureInterval(1, m, m, "exact", D)
    lams = {r: _lebesgue_tail(r, D) for r in range(1, n)}
    root = (0, 1, 1, 1)   # convergent state after the leading digit 1
    pp, qp, p, q = root
    one = 1 << SCALE_BITS
    f_lo, f_hi = _tail_factors(pp, qp, p, q, D, lams[n - 1])
    lo, hi = _mul_down(one, f_lo), _mul_up(one, f_hi)
    if n == 2:
        lo, hi = _leaf_products(pp, qp, p, q, D, lo, hi)
    else:
        jobs = [(n, 2, D, (p, q, d * p + pp, d * q + qp), lams) for d in range(1, D + 1)]
        workers = thread_cap() if threads is None else threads
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as ex:
                parts = list(ex.map(_subtree, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
        else:
            parts = [_subtree(job) for job in jobs]
        for sl, sh in parts:
            lo = lo * sl >> SCALE_BITS
            hi = -((-hi * sh) >> SCALE_BITS)
    log.debug("en_exact n=%d D=%d: accumulator bits lo=%d hi=%d", n, D, lo.bit_length(), hi.bit_length())
    lower = ExactMeasure(Fraction(lo, one))
    upper = ExactMeasure(Fraction(hi, one))
    return MeasureInterval(n, lower, upper, "enumeration", D)


def en_partial_sum(n: int, D: int, max_terms: int = 10**5) -> ExactMeasure:
    """Exact sum of the enumerated cylinders only (no remainder), for small trees."""
    check_guard(n, D)
    if n == 1:
        return cylinder_measure((1, 1))
    if D ** (n - 1) > max_terms:
        raise ResourceError(f"{D ** (n - 1)} cylinders exceed max_terms={max_terms}")
    return measure_sum(cylinder_measure((1,) + tail + (1,))
                       for tail in itertools.product(range(1, D + 1), repeat=n - 1))


@dataclass(frozen=True)
class Comparison:
    n: int
    ordering: str                 # "less" | "equal" | "greater" | "undecided"
    interval: MeasureInterval
    certificate: str

    @property
    def decided(self) -> bool:
        return self.ordering != "undecided"

    @property
    def agrees_with_printed_inequality(self) -> bool:
        """Whether the result matches ``mu(E_n) < mu(E_1)``."""
        return self.ordering == "less"


def default_cutoffs(n: int, max_leaves: int = 4 * 10**6) -> List[int]:
    out, D = [], 8
    while (n - 1) * math.log2(D) <= GUARD_BITS and D ** (n - 1) <= max_leaves:
        out.append(D)
        D *= 4
    return out or [1]


def compare_en_e1(n: int, cutoffs: Optional[List[int]] = None) -> Comparison:
    """Decide ``mu(E_n)`` versus ``mu(E_1)`` by comparing rational ratios."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    e1 = MU_E1
    if n == 1:
        iv = en_exact(1, 1)
        return Comparison(1, "equal", iv, "E_1 itself: ratio 10/9 on both sides")
    iv = None
    for D in cutoffs or default_cutoffs(n):
        iv = en_exact(n, D)
        if iv.lower > e1:
            return Comparison(n, "greater", iv,
                              f"lower ratio at D={D} exceeds 10/9: "
                              f"{_short(iv.lower.ratio)} > 10/9")
        if iv.upper < e1:
            return Comparison(n, "less", iv,
                              f"upper ratio at D={D} is below 10/9: "
                              f"{_short(iv.upper.ratio)} < 10/9")
    return Comparison(n, "undecided", iv, f"10/9 inside the interval at the largest cutoff D={iv.D}")


def _short(r: Fraction) -> str:
    return f"{float(r):.15g} (exact dyadic, {r.denominator.bit_length() - 1}-bit denominator)"


# --------------------------------------------------------------------------
# psi recursion

def _psi0(s):
    return np.log1p(s) - np.log1p(0.5 * s)


def _psi_step(prev: Chebyshev, deg: int, D: int) -> Chebyshev:
    d = np.arange(1, D + 1, dtype=np.float64)
    fixed = prev(1.0 / d)
    a1, a2, a3 = (prev.deriv(k)(0.0) for k in (1, 2, 3))
    q = D + 1.0

    def f(s):
        s = np.atleast_1d(s)
        head = (fixed[:, None] - prev(1.0 / (d[:, None] + s[None, :]))).sum(axis=0)
        tail = (a1 * (digamma(q + s) - digamma(q))
                + a2 / 2.0 * (zeta(2, q) - zeta(2, q + s))
                + a3 / 6.0 * (zeta(3, q) - zeta(3, q + s)))
        return head + tail

    return Chebyshev.interpolate(f, deg, domain=[0.0, 1.0])


def _en_psi(n: int, deg: int, D: int) -> float:
    cur = Chebyshev.interpolate(_psi0, deg, domain=[0.0, 1.0])
    for _ in range(n - 1):
        cur = _psi_step(cur, deg, D)
    return float((cur(1.0) - cur(0.5)) / LN2)


def en_refined(n: int) -> MeasureInterval:
    """``mu(E_n)`` by the psi recursion with an estimated error bar.

    Computed at two resolutions; the bar is ten times their difference
    (at least ``1e-13``).  This is an estimate, not a certificate.
    """
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    fine = _en_psi(n, 36, 20000)
    coarse = _en_psi(n, 28, 8000)
    err = max(10.0 * abs(fine - coarse), 1e-13)
    return MeasureInterval(n, _measure_at(fine - err, -1), _measure_at(fine + err, +1),
                           "psi-recursion", None, certified=False)


def _measure_at(v: float, direction: int) -> ExactMeasure:
    r = 2.0 ** v
    r = math.nextafter(math.nextafter(r, direction * math.inf), direction * math.inf)
    return ExactMeasure(Fraction(max(r, 1.0)))


# --------------------------------------------------------------------------
# golden values

GOLDEN_NAME = "golden_en.json"
GOLDEN_D = 10**5


def golden_record(iv: MeasureInterval) -> dict:
    return {
        "n": iv.n,
        "D": iv.D,
        "method": iv.method,
        "lower_ratio": f"{iv.lower.ratio.numerator}/{iv.lower.ratio.denominator}",
        "upper_ratio": f"{iv.upper.ratio.numerator}/{iv.upper.ratio.denominator}",
        "decimal_50": {"lower": iv.lower.decimal(50), "upper": iv.upper.decimal(50)},
        "width": iv.width,
    }


def write_golden(path, intervals) -> Path:
    path = Path(path)
    path.write_text(json.dumps([golden_record(iv) for iv in intervals], indent=2) + "\n")
    return path


def read_golden(path=None) -> dict:
    """Golden intervals keyed by ``n``; defaults to the packaged file."""
    if path is None:
        text = resources.files("cflab.data").joinpath(GOLDEN_NAME).read_text()
    else:
        text = Path(path).read_text()
    out = {}
    for rec in json.loads(text):
        out[rec["n"]] = MeasureInterval(rec["n"], ExactMeasure(Fraction(rec["lower_ratio"])),
                                        ExactMeasure(Fraction(rec["upper_ratio"])),
                                        rec["method"], rec["D"])
    return out


def build_golden(path=None, D: int = GOLDEN_D) -> Path:
    """Recompute the packaged golden file (n = 1 exact, n = 2 at cutoff ``D``)."""
    if path is None:
        path = Path(__file__).parent / "data" / GOLDEN_NAME
    return write_golden(path, [en_exact(1, 1), en_exact(2, D)])


def golden_en(n: int) -> MeasureInterval:
    return read_golden()[n]


def oracle_estimate(n: int) -> MeasureInterval:
    """Best available interval: exact for n=1, golden certificate, then psi recursion."""
    if n == 1:
        return en_exact(1, 1)
    try:
        return golden_en(n)
    except (KeyError, FileNotFoundError):
        return en_refined(n)


def oracle_interval(n: int, D: Optional[int] = None) -> MeasureInterval:
    """Certified interval at cutoff ``D`` (the largest allowed by the guard if omitted)."""
    if D is None:
        D = default_cutoffs(n)[-1]
    return en_exact(n, D)


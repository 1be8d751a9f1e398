"""Digit frequencies along arithmetic progressions of a Gauss-typical expansion.

Along the progression ``a_k, a_{m+k}, a_{2m+k}, ...`` single digits keep their
Gauss frequencies, but the pair ``[1, 1]`` occurs with frequency
``mu(A n T^-m A)`` instead of ``mu(C_[1,1])``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .core import DomainError, as_digits, cylinder_measure
from .oracle import MeasureInterval, oracle_estimate
from .sampler import DEFAULT_KMAX, GaussSampler
from .skew import MarkerFamily, marker_trajectory
from .streams import DigitStream
from .transfer import MU_A, MU_E1, correlation_via_operator, lemma_bound

Z_WIDEN = 2.0
ORACLE_MAX_M = 6


@dataclass(frozen=True)
class APSchedule:
    """Indices ``k, m + k, 2m + k, ...`` (1-based)."""

    m: int
    k: int = 1

    def __post_init__(self):
        if self.m < 1 or self.k < 1:
            raise DomainError(f"need m >= 1 and k >= 1, got m={self.m}, k={self.k}")

    @property
    def theorem_regime(self) -> bool:
        return self.m >= 2

    def required_length(self, n: int) -> int:
        return 0 if n == 0 else (n - 1) * self.m + self.k


def ap_subsample(stream: DigitStream, schedule: APSchedule, n: int) -> DigitStream:
    """The first ``n`` digits of the progression as a new finite stream."""
    if n < 0:
        raise DomainError("n must be >= 0")
    digits = stream.take(schedule.required_length(n))
    sub = np.array(digits[schedule.k - 1::schedule.m][:n])
    return DigitStream("subsample", sub, meta={"m": schedule.m, "k": schedule.k, "parent": stream.source})


def string_counts(digits: np.ndarray, s: Sequence[int], n: int) -> int:
    """Overlapping occurrences of ``s`` starting at positions ``0..n-1``."""
    hit = np.ones(n, dtype=bool)
    for j, d in enumerate(s):
        hit &= digits[j:j + n] == d
    return int(hit.sum())


def string_frequency(stream: DigitStream, s: Sequence[int], n: int) -> float:
    """Fraction of the windows ``i = 0..n-1`` at which ``s`` starts."""
    s = as_digits(s)
    if n < 1:
        raise DomainError("n must be >= 1")
    if not s:
        raise DomainError("empty string")
    digits = stream.take(n + len(s) - 1)
    return string_counts(digits, s, n) / n


def binomial_stderr(p: float, n: int, length: int = 1) -> float:
    widen = 1.0 if length == 1 else Z_WIDEN
    return widen * math.sqrt(p * (1.0 - p) / n)


# --------------------------------------------------------------------------
# two independent counts of [1, 1] along the progression

def pair_count_direct(digits: np.ndarray, m: int, k: int, n: int) -> int:
    """Scan the subsample: ``i < n`` with ``a_{im+k} = a_{(i+1)m+k} = 1``."""
    sub = digits[k - 1::m][:n + 1]
    if sub.size < n + 1:
        raise DomainError("not enough digits for the requested windows")
    return int(np.count_nonzero((sub[:-1] == 1) & (sub[1:] == 1)))


def pair_frequency_skew(digits: np.ndarray, m: int, k: int, n: int, backend=None) -> float:
    """``m`` times the visit frequency of ``(x, 1)`` to ``(E_m, k)`` over ``mn`` steps.

    The marker follows the rotation automaton; ``T^j x`` lies in ``E_m`` when
    its first and ``(m+1)``-th digits are 1.  For ``k > m`` the visited
    marker is ``k mod m`` and the windows are shifted by whole periods.
    """
    steps = m * n
    if digits.size < steps + m:
        raise DomainError(f"need {steps + m} digits, have {digits.size}")
    markers = marker_trajectory(digits[:steps], MarkerFamily.rotation(m), 1, backend=backend)[:-1]
    target = (k - 1) % m + 1
    in_em = (digits[:steps] == 1) & (digits[m:steps + m] == 1)
    visits = int(np.count_nonzero(in_em & (markers == target)))
    return m * visits / steps


def route_tolerance(m: int, k: int, n: int) -> float:
    return max(2, (k - 1) // m) / n


# --------------------------------------------------------------------------
# reports

@dataclass
class FrequencyRow:
    string: tuple
    count: int
    empirical: float
    target: float
    provenance: str
    stderr: float
    deviation: float          # in standard errors

    def as_dict(self):
        d = asdict(self)
        d["string"] = list(self.string)
        return d


@dataclass
class FrequencyReport:
    seed: Optional[int]
    m: int
    k: int
    n: int
    rows: List[FrequencyRow]
    target_em: Dict
    gap_bound: Optional[float]
    checks: Dict[str, bool]
    sampler: Dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def row(self, s) -> FrequencyRow:
        s = tuple(s)
        for r in self.rows:
            if r.string == s:
                return r
        raise KeyError(s)

    @property
    def pair(self) -> FrequencyRow:
        return self.row((1, 1))

    def manifest(self) -> dict:
        return {
            "seed": self.seed, "m": self.m, "k": self.k, "n": self.n,
            "targets": {" ".join(map(str, r.string)): r.target for r in self.rows},
            "provenance": {" ".join(map(str, r.string)): r.provenance for r in self.rows},
            "target_em": self.target_em,
            "tool_version": __version__,
            "sampler": self.sampler,
        }

    def to_json(self, path) -> Path:
        path = Path(path)
        body = {"manifest": self.manifest(), "rows": [r.as_dict() for r in self.rows],
                "gap_bound": self.gap_bound, "checks": self.checks, "passed": self.passed}
        path.write_text(json.dumps(body, indent=2) + "\n")
        return path

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["string", "count", "empirical", "target", "provenance", "stderr", "deviation"])
            for r in self.rows:
                w.writerow([" ".join(map(str, r.string)), r.count, f"{r.empirical:.10g}",
                            f"{r.target:.10g}", r.provenance, f"{r.stderr:.6g}", f"{r.deviation:.4f}"])
        return path


def em_target(m: int) -> dict:
    """Value of ``mu(E_m)`` with provenance (exact > oracle > operator)."""
    if m == 1:
        return {"value": MU_E1, "lower": MU_E1, "upper": MU_E1, "provenance": "exact", "method": "closed form"}
    if m <= ORACLE_MAX_M:
        iv: MeasureInterval = oracle_estimate(m)
        return {"value": iv.midpoint, "lower": iv.lo, "upper": iv.hi, "provenance": "oracle",
                "method": iv.method, "certified": iv.certified}
    est = correlation_via_operator(m)
    return {"value": est.value, "lower": est.value - est.error, "upper": est.value + est.error,
            "provenance": "operator", "method": "transfer operator"}


def gap_lower_bound(m: int) -> float:
    """Lower bound on ``mu(E_m) - mu(E_1)`` implied by the band around ``mu(A)``."""
    return MU_A * (MU_A - lemma_bound(m)) - MU_E1


def frequency_report(digits: np.ndarray, m: int, k: int, n: int, seed=None,
                     dmax: int = 5, z_max: float = 4.0, target_tol: Optional[float] = None,
                     sampler_meta=None) -> FrequencyReport:
    """Frequencies along the progression of ``digits`` with targets and checks.

    ``digits`` must hold at least ``n m + k`` entries (the progression then
    has ``n + 1`` terms, enough for ``n`` windows of length two).
    """
    sched = APSchedule(m, k)
    sub = digits[k - 1::m][:n + 1]
    if sub.size < n + 1:
        raise DomainError(f"need {n * m + k} digits, have {digits.size}")
    rows = []
    for d in range(1, dmax + 1):
        p = float(cylinder_measure((d,)))
        c = string_counts(sub, (d,), n)
        se = binomial_stderr(p, n)
        rows.append(FrequencyRow((d,), c, c / n, p, "exact", se, (c / n - p) / se))
    tgt = em_target(m)
    c = string_counts(sub, (1, 1), n)
    p = tgt["value"]
    se = binomial_stderr(p, n, 2)
    rows.append(FrequencyRow((1, 1), c, c / n, p, tgt["provenance"], se, (c / n - p) / se))
    f11 = c / n
    checks = {f"digit{d}_within_{z_max:g}sigma": abs(rows[d - 1].deviation) <= z_max for d in range(1, dmax + 1)}
    tol = z_max * se if target_tol is None else target_tol
    checks["pair_near_target"] = abs(f11 - p) <= tol
    gap = None
    if sched.theorem_regime:
        gap = gap_lower_bound(m)
        checks["pair_separated_from_E1"] = f11 - MU_E1 >= gap
    return FrequencyReport(seed, m, k, n, rows, tgt, gap, checks, dict(sampler_meta or {}))


def theorem_experiment(seed: int, m: int, k: int, n: int, kmax: int = DEFAULT_KMAX,
                       backend=None, **kw) -> FrequencyReport:
    """Sample ``n m + k`` Gauss digits from ``seed`` and report along the progression."""
    APSchedule(m, k)
    total = n * m + k
    sampler = GaussSampler(seed, kmax=kmax, backend=backend)
    digits = sampler.draw(total)
    return frequency_report(digits, m, k, n, seed=seed, sampler_meta=sampler.metadata(total), **kw)


__all__ = [
    "APSchedule", "ap_subsample", "string_frequency", "string_counts", "pair_count_direct",
    "pair_frequency_skew", "route_tolerance", "FrequencyRow", "FrequencyReport", "em_target",
    "gap_lower_bound", "frequency_report", "theorem_experiment",
]

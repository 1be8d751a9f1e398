"""The Gauss map augmented by a finite marker automaton.

A point is ``(x, M)`` with ``M`` in ``{1..m}``; one step consumes the first
digit ``a`` of ``x`` and moves the marker to ``f_a(M)``.  A
:class:`MarkerFamily` holds finitely many permutations and a rule choosing
one of them for every digit.
"""
from __future__ import annotations

import csv
import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .core import cylinder_measure
from .streams import DigitStream, InsufficientDigits

Perm = Tuple[int, ...]


class StreamExhausted(EOFError):
    """The digit stream has no next digit."""


def _check_perm(p: Sequence[int], m: int) -> Perm:
    p = tuple(int(v) for v in p)
    if sorted(p) != list(range(1, m + 1)):
        raise ValueError(f"{p} is not a permutation of 1..{m}")
    return p


@dataclass(frozen=True)
class MarkerFamily:
    """Permutations ``perms`` of ``{1..m}`` (1-based images) and a digit rule.

    Digit ``a`` uses ``perms[assignment[a]]`` if ``a`` is assigned and
    ``perms[default]`` otherwise.
    """

    m: int
    perms: Tuple[Perm, ...]
    assignment: Dict[int, int] = field(default_factory=dict)
    default: int = 0
    name: str = "custom"

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        perms = tuple(_check_perm(p, self.m) for p in self.perms)
        object.__setattr__(self, "perms", perms)
        object.__setattr__(self, "assignment", dict(self.assignment))
        if not 0 <= self.default < len(perms):
            raise ValueError("default permutation index out of range")
        for a, idx in self.assignment.items():
            if a < 1 or not 0 <= idx < len(perms):
                raise ValueError(f"bad assignment {a} -> {idx}")

    def __hash__(self):
        return hash((self.m, self.perms, tuple(sorted(self.assignment.items())), self.default))

    @classmethod
    def rotation(cls, m: int) -> "MarkerFamily":
        """``f_a(j) = j + 1 mod m`` for every digit."""
        return cls(m, (tuple(j % m + 1 for j in range(1, m + 1)),), name=f"rotation{m}")

    @classmethod
    def identity(cls, m: int) -> "MarkerFamily":
        return cls(m, (tuple(range(1, m + 1)),), name=f"identity{m}")

    @classmethod
    def digit_swap(cls, digit: int = 1) -> "MarkerFamily":
        """``m = 2``: ``digit`` swaps the markers, every other digit fixes them."""
        return cls(2, ((1, 2), (2, 1)), {digit: 1}, 0, name=f"swap-on-{digit}")

    def perm_index(self, a: int) -> int:
        return self.assignment.get(int(a), self.default)

    def apply(self, a: int, marker: int) -> int:
        if not 1 <= marker <= self.m:
            raise ValueError(f"marker {marker} outside 1..{self.m}")
        return self.perms[self.perm_index(a)][marker - 1]

    def classes(self, digits) -> np.ndarray:
        """Permutation index for each digit."""
        digits = np.asarray(digits, dtype=np.int64)
        out = np.full(digits.shape, self.default, dtype=np.int64)
        for a, idx in self.assignment.items():
            out[digits == a] = idx
        return out

    def used_perms(self) -> Dict[int, int]:
        """Perm index -> smallest digit using it."""
        reps: Dict[int, int] = {}
        for a in sorted(self.assignment):
            reps.setdefault(self.assignment[a], a)
        a = 1
        while a in self.assignment:
            a += 1
        reps.setdefault(self.default, a)
        return reps

    def relabel(self, sigma: Sequence[int]) -> "MarkerFamily":
        """Conjugate every permutation by the relabelling ``sigma`` (1-based)."""
        sigma = _check_perm(sigma, self.m)
        inv = [0] * self.m
        for i, s in enumerate(sigma):
            inv[s - 1] = i + 1
        perms = tuple(tuple(sigma[p[inv[j] - 1] - 1] for j in range(self.m)) for p in self.perms)
        return MarkerFamily(self.m, perms, self.assignment, self.default, self.name + "-relabelled")


@dataclass(frozen=True)
class AugmentedPoint:
    stream: DigitStream
    position: int
    marker: int


def start(stream: DigitStream, marker: int = 1) -> AugmentedPoint:
    return AugmentedPoint(stream, 0, marker)


def step(point: AugmentedPoint, family: MarkerFamily) -> AugmentedPoint:
    """One application of the augmented map."""
    try:
        a = int(point.stream.take(point.position + 1)[point.position])
    except InsufficientDigits:
        raise StreamExhausted(f"no digit at position {point.position}") from None
    return AugmentedPoint(point.stream, point.position + 1, family.apply(a, point.marker))


def marker_trajectory(digits, family: MarkerFamily, start_marker: int = 1, backend=None) -> np.ndarray:
    """Markers after ``0..len(digits)`` steps (1-based labels)."""
    if not 1 <= start_marker <= family.m:
        raise ValueError(f"marker {start_marker} outside 1..{family.m}")
    perms0 = np.asarray(family.perms, dtype=np.int64) - 1
    walk = kernels.marker_walk(family.classes(digits), perms0, start_marker - 1, backend=backend)
    return walk + 1


# --------------------------------------------------------------------------
# transitivity

@dataclass
class TransitivityResult:
    transitive: bool
    witnesses: Dict[Tuple[int, int], Tuple[int, ...]]
    missing: List[Tuple[int, int]]

    def __bool__(self):
        return self.transitive


def is_transitive(family: MarkerFamily, max_depth: Optional[int] = None) -> TransitivityResult:
    """Whether every marker reaches every marker by a nonempty digit word.

    Breadth-first search on the marker graph whose edges are the
    permutations in use.  Witness words are returned as digit strings
    (one representative digit per permutation) and are shortest possible;
    words longer than ``max_depth`` are not reported.
    """
    reps = family.used_perms()
    gens = [(family.perms[i], d) for i, d in sorted(reps.items())]
    m = family.m
    found: Dict[Tuple[int, int], Tuple[int, ...]] = {}
    for src in range(1, m + 1):
        seen: Dict[int, Tuple[int, ...]] = {}
        queue = deque()
        for perm, d in gens:
            tgt = perm[src - 1]
            if tgt not in seen:
                seen[tgt] = (d,)
                queue.append(tgt)
        while queue:
            cur = queue.popleft()
            for perm, d in gens:
                tgt = perm[cur - 1]
                if tgt not in seen:
                    seen[tgt] = seen[cur] + (d,)
                    queue.append(tgt)
        for tgt, word in seen.items():
            found[(src, tgt)] = word
    missing = [(a, b) for a in range(1, m + 1) for b in range(1, m + 1) if (a, b) not in found]
    witnesses = {k: w for k, w in found.items() if max_depth is None or len(w) <= max_depth}
    return TransitivityResult(not missing, witnesses, missing)


# --------------------------------------------------------------------------
# equidistribution

Z_WIDEN = 2.0   # strings of length >= 2 have correlated indicators


@dataclass
class EquidistributionRow:
    string: Tuple[int, ...]
    marker: int
    count: int
    empirical: float
    target: float
    stderr: float
    z_score: float


@dataclass
class EquidistributionReport:
    family: MarkerFamily
    start_marker: int
    n: int
    rows: List[EquidistributionRow]

    def row(self, s: Iterable[int], marker: int) -> EquidistributionRow:
        s = tuple(s)
        for r in self.rows:
            if r.string == s and r.marker == marker:
                return r
        raise KeyError((s, marker))

    def max_abs_z(self, length: Optional[int] = None) -> float:
        return max(abs(r.z_score) for r in self.rows if length is None or len(r.string) == length)

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["string", "marker", "empirical", "target", "stderr", "z_score"])
            for r in self.rows:
                w.writerow([" ".join(map(str, r.string)), r.marker, f"{r.empirical:.10g}",
                            f"{r.target:.10g}", f"{r.stderr:.6g}", f"{r.z_score:.4f}"])
        return path


def window_codes(digits: np.ndarray, length: int, dmax: int, n: int) -> np.ndarray:
    """Base-``dmax`` code of each window ``digits[i:i+length]``, ``i < n``; -1 if a digit exceeds ``dmax``."""
    code = np.zeros(n, dtype=np.int64)
    bad = np.zeros(n, dtype=bool)
    for j in range(length):
        w = digits[j:j + n]
        bad |= w > dmax
        code = code * dmax + (np.minimum(w, dmax) - 1)
    code[bad] = -1
    return code


def equidistribution_report(stream: DigitStream, family: MarkerFamily, start_marker: int = 1,
                            max_length: int = 2, n_iterations: int = 10**6, dmax: int = 3,
                            backend=None) -> EquidistributionReport:
    """Empirical frequency of visits to ``(C_s, M)`` against ``mu(C_s)/m``.

    Strings run over all words of length ``1..max_length`` with digits up to
    ``dmax``.  Standard errors are binomial with ``p`` the target, widened by
    a factor 2 for strings of length two or more.
    """
    if n_iterations < 1:
        raise ValueError("n_iterations must be >= 1")
    need = n_iterations + max_length - 1
    digits = stream.take(need)            # raises InsufficientDigits
    markers = marker_trajectory(digits[:n_iterations], family, start_marker, backend=backend)[:-1]
    n, m = n_iterations, family.m
    rows = []
    for length in range(1, max_length + 1):
        codes = window_codes(digits, length, dmax, n)
        ok = codes >= 0
        counts = np.bincount(codes[ok] * m + (markers[ok] - 1), minlength=dmax ** length * m)
        widen = 1.0 if length == 1 else Z_WIDEN
        for idx, s in enumerate(itertools.product(range(1, dmax + 1), repeat=length)):
            p = float(cylinder_measure(s)) / m
            se = widen * math.sqrt(p * (1.0 - p) / n)
            for mk in range(1, m + 1):
                c = int(counts[idx * m + mk - 1])
                emp = c / n
                rows.append(EquidistributionRow(s, mk, c, emp, p, se, (emp - p) / se))
    return EquidistributionReport(family, start_marker, n, rows)

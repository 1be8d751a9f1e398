"""Transfer operator of the Gauss map and Wirsing's derivative operator.

Functions on ``[0, 1]`` are held as node values on a uniform grid with a
not-a-knot cubic spline between nodes (:class:`DensityProfile`).  Every
operator image carries an error estimate in sup norm, built from the series
truncation remainder, the spline interpolation error of the input and
floating-point rounding.  The transfer operator is positive with ``P 1 = 1``,
so input errors pass through it without growth and the estimates simply add.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, List, Optional, Union

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import polygamma

from . import kernels

LOG2 = math.log(2.0)
LOG43 = math.log(4.0 / 3.0)
MU_A = LOG43 / LOG2
MU_E1 = math.log(10.0 / 9.0) / LOG2
EPS = np.finfo(float).eps


@dataclass(frozen=True)
class OperatorConfig:
    """Discretisation: series truncation ``K``, grid size ``N``, quadrature rule."""

    K: int = 10_000
    N: int = 2048
    quadrature: str = "simpson"

    def __post_init__(self):
        if self.K < 16:
            raise ValueError("K must be >= 16")
        if self.N < 64 or self.N % 4:
            raise ValueError("N must be >= 64 and divisible by 4")
        if self.quadrature != "simpson":
            raise ValueError(f"unknown quadrature rule {self.quadrature!r}")

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.N + 1)


DEFAULT_CONFIG = OperatorConfig()


class DensityProfile:
    """Node values of a function on ``[0, 1]`` plus a sup-norm error estimate."""

    def __init__(self, values, error: float = 0.0, label: str = "", meta: Optional[dict] = None):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 1 or values.size < 65:
            raise ValueError("need at least 65 node values")
        if not np.all(np.isfinite(values)):
            raise ValueError("profile values must be finite")
        self.values = values
        self.error = float(error)
        self.label = label
        self.meta = dict(meta or {})

    @classmethod
    def from_function(cls, f: Callable, N: int = DEFAULT_CONFIG.N, label: str = "") -> "DensityProfile":
        x = np.linspace(0.0, 1.0, N + 1)
        return cls(f(x), error=0.0, label=label)

    @property
    def N(self) -> int:
        return self.values.size - 1

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.N + 1)

    @cached_property
    def spline(self) -> CubicSpline:
        return CubicSpline(self.nodes, self.values, bc_type="not-a-knot")

    @cached_property
    def coeffs(self) -> np.ndarray:
        return np.ascontiguousarray(self.spline.c)

    @cached_property
    def primitive_coeffs(self) -> np.ndarray:
        return np.ascontiguousarray(self.spline.antiderivative().c)

    def __call__(self, x):
        return self.spline(x)

    def interpolation_error(self) -> float:
        """Estimate of the cubic interpolation error, ``5/384 h^4 max|f''''|``.

        The fourth derivative is estimated from fourth differences of the
        node values, which makes the ``h^4`` cancel.
        """
        d4 = np.diff(self.values, 4)
        return 5.0 / 384.0 * float(np.max(np.abs(d4))) if d4.size else 0.0

    def derivative(self) -> "DensityProfile":
        """Node values of the spline derivative; one-sided at the endpoints."""
        return DensityProfile(self.spline(self.nodes, 1), error=0.0, label=f"d/dx {self.label}".strip())

    def sup(self, lo: float = 0.0, hi: float = 1.0, samples: int = 65) -> float:
        x = np.linspace(lo, hi, samples)
        return float(np.max(np.abs(self.spline(x))))

    def mu_integral(self, lo_index: int = 0, hi_index: Optional[int] = None):
        """``int f(t)/(1+t) dt`` between two nodes by composite Simpson.

        Returns ``(value, quadrature_error_estimate)``; the estimate is the
        Richardson difference against the half-resolution rule.
        """
        hi_index = self.N if hi_index is None else hi_index
        x = self.nodes[lo_index:hi_index + 1]
        y = self.values[lo_index:hi_index + 1] / (1.0 + x)
        fine = _simpson(y, self.h)
        coarse = _simpson(y[::2], 2 * self.h) if (len(y) - 1) % 4 == 0 else fine
        return fine, abs(fine - coarse) / 15.0

    def __repr__(self) -> str:
        return f"DensityProfile({self.label!r}, N={self.N}, error={self.error:.2e})"


def _simpson(y, h):
    if (len(y) - 1) % 2:
        raise ValueError("Simpson's rule needs an even number of intervals")
    return h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum())


class Indicator:
    """Indicator of ``[lo, hi)`` with one-sided limits for endpoint nodes."""

    def __init__(self, lo: float, hi: float):
        self.lo, self.hi = float(lo), float(hi)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        return ((y >= self.lo) & (y < self.hi)).astype(float)

    def limit(self, y, side: int):
        """Limit from below (``side=-1``) or above (``side=+1``)."""
        y = np.asarray(y, dtype=float)
        if side < 0:
            return ((y > self.lo) & (y <= self.hi)).astype(float)
        return ((y >= self.lo) & (y < self.hi)).astype(float)


INDICATOR_A = Indicator(0.5, 1.0)

Operand = Union[DensityProfile, Callable]


# --------------------------------------------------------------------------
# transfer operator

def _tail_first_order(x, K):
    """Sums over ``k > K`` of the weights and of weight * 1/(k+x)."""
    a = K + 1.0 + x
    s0 = (1.0 + x) / a
    s1 = (1.0 + x) * (polygamma(1, a) - 1.0 / a)
    return s0, s1


def apply_transfer(f: Operand, cfg: OperatorConfig = DEFAULT_CONFIG) -> DensityProfile:
    """One application of the transfer operator on the grid of ``cfg``.

    ``f`` is either a :class:`DensityProfile` (evaluated through its spline)
    or a vectorised callable evaluated exactly.  The terms ``k > K`` are added
    as a Taylor correction around 0 and their remainder is bounded; the bound
    per node is kept in ``meta["tail_bound"]``.
    """
    x = cfg.nodes
    K = cfg.K
    s0, s1 = _tail_first_order(x, K)
    if isinstance(f, DensityProfile):
        head = kernels.transfer_sum(f.coeffs, f.h, x, K)
        f0 = f.values[0]
        df0 = float(f.spline(0.0, 1))
        # |f''| on [0, 1/(K+1)] lies in the first spline cell
        c = f.coeffs
        d2 = abs(2.0 * c[1, 0]) + abs(6.0 * c[0, 0]) * f.h
        tail = f0 * s0 + df0 * s1
        tail_bound = 0.5 * d2 * (1.0 + x) / (3.0 * (K + x) ** 3)
        in_error = f.error + f.interpolation_error()
        scale = float(np.max(np.abs(f.values)))
    else:
        head = _transfer_callable(f, x, K)
        f0 = float(_at(f, np.array([0.0]), +1)[0])
        probe = np.linspace(0.0, 1.0 / (K + 1.0), 33)
        osc = float(np.max(np.abs(_at(f, probe, +1) - f0)))
        tail = f0 * s0
        tail_bound = osc * s0
        in_error = 0.0
        scale = float(np.max(np.abs(f(np.linspace(0.0, 1.0, 257)))))
    rounding = 4.0 * K * EPS * scale
    values = head + tail
    err = in_error + float(np.max(tail_bound)) + rounding
    label = getattr(f, "label", "") or getattr(f, "__name__", "f")
    return DensityProfile(values, error=err, label=f"P[{label}]",
                          meta={"tail_bound": tail_bound, "rounding": rounding})


def _at(f, y, side):
    if hasattr(f, "limit"):
        return f.limit(y, side)
    return np.asarray(f(y), dtype=float)


def _transfer_callable(f, x, K, block=256):
    # interior nodes see f at 1/(k+x); the endpoint nodes take the limits
    # from inside (0, 1), which is the continuous extension of the operator
    inner = x[1:-1]
    acc = np.zeros(x.size)
    for hi in range(K, 0, -block):
        k = np.arange(hi, max(hi - block, 0), -1, dtype=np.float64)
        a = k[:, None] + inner[None, :]
        acc[1:-1] += ((1.0 + inner) / (a * (a + 1.0)) * _at(f, 1.0 / a, 0)).sum(axis=0)
        for j, (xe, side) in enumerate(((0.0, -1), (1.0, +1))):
            ae = k + xe
            acc[0 if j == 0 else -1] += ((1.0 + xe) / (ae * (ae + 1.0)) * _at(f, 1.0 / ae, side)).sum()
    return acc


# --------------------------------------------------------------------------
# densities f_n and the correlation mu(A n T^-n A)

def f1_values(x):
    return 1.0 / ((2.0 + x) * LOG43)


_PIPELINE_CACHE: Dict[OperatorConfig, List[DensityProfile]] = {}


def density_pipeline(n: int, cfg: OperatorConfig = DEFAULT_CONFIG, all_iterates: bool = False):
    """``f_n = P^(n-1) f_1`` with ``f_1(x) = 1/((2+x) log(4/3))``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    seq = _PIPELINE_CACHE.setdefault(cfg, [])
    if not seq:
        seq.append(DensityProfile(f1_values(cfg.nodes), error=0.0, label="f_1"))
    while len(seq) < n:
        nxt = apply_transfer(seq[-1], cfg)
        nxt.label = f"f_{len(seq) + 1}"
        seq.append(nxt)
    return list(seq[:n]) if all_iterates else seq[n - 1]


@dataclass
class CorrelationEstimate:
    n: int
    value: float
    error: float
    quadrature_error: float
    profile_error: float
    cfg: OperatorConfig = field(default=DEFAULT_CONFIG, repr=False)

    @property
    def interval(self):
        return self.value - self.error, self.value + self.error


def correlation_via_operator(n: int, cfg: OperatorConfig = DEFAULT_CONFIG) -> CorrelationEstimate:
    """``mu(A n T^-n A) = mu(A) (m_n(1) - m_n(1/2))`` from the density ``f_n``."""
    fn = density_pipeline(n, cfg)
    half = cfg.N // 2
    integral, quad = fn.mu_integral(half, cfg.N)
    profile_err = fn.error * math.log(4.0 / 3.0)
    value = MU_A * integral
    error = MU_A * (quad + profile_err) + 8 * EPS
    return CorrelationEstimate(n, value, error, MU_A * quad, MU_A * profile_err, cfg)


def m_n(n: int, cfg: OperatorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """``m_n`` at every node (cumulative trapezoid-free Simpson on pairs)."""
    fn = density_pipeline(n, cfg)
    y = fn.values / (1.0 + cfg.nodes)
    out = np.zeros_like(y)
    # Simpson on even nodes, cubic-spline integral between
    prim = CubicSpline(cfg.nodes, y).antiderivative()
    out[:] = prim(cfg.nodes) - prim(0.0)
    return out


def lemma_bound(n: int) -> float:
    """``log(3/2)/2^(n+2)``, the bound on ``|r_n(1/2)|``."""
    return math.log(1.5) / 2.0 ** (n + 2)


LEMMA_THRESHOLD = MU_A - math.log(10.0 / 9.0) / LOG43


@dataclass
class LemmaReport:
    n: int
    r_n_half: float
    bound: float
    numerical_error: float
    correlation: float
    passed: bool
    oracle_value: Optional[float] = None
    oracle_agrees: Optional[bool] = None

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def verify_lemma_bound(n: int, cfg: OperatorConfig = DEFAULT_CONFIG, cross_check: bool = True) -> LemmaReport:
    """Check ``|mu(A) - mu(E_n)/mu(A)| <= log(3/2)/2^(n+2)`` numerically."""
    est = correlation_via_operator(n, cfg)
    r = MU_A - est.value / MU_A
    err = est.error / MU_A
    bound = lemma_bound(n)
    rep = LemmaReport(n, r, bound, err, est.value, abs(r) <= bound + err)
    if cross_check and n <= 6:
        from .oracle import oracle_estimate
        ref = oracle_estimate(n)
        rep.oracle_value = ref.midpoint
        rep.oracle_agrees = ref.contains_value(est.value, est.error)
    return rep


def refinement_study(n: int, grids=(512, 1024, 2048), K: int = DEFAULT_CONFIG.K):
    """``mu(E_n)`` on successively finer grids; returns ``(values, agreed_digits)``."""
    vals = [correlation_via_operator(n, OperatorConfig(K=K, N=N)).value for N in grids]
    spread = max(vals) - min(vals)
    digits = math.inf if spread == 0 else -math.log10(spread / abs(vals[-1]))
    return vals, digits


# --------------------------------------------------------------------------
# Wirsing's operator on derivatives

def apply_wirsing_U(g: DensityProfile, cfg: OperatorConfig = DEFAULT_CONFIG) -> DensityProfile:
    """Truncated Wirsing series with exact cell integrals of the spline of ``g``."""
    x = cfg.nodes
    K = cfg.K
    head = kernels.wirsing_sum(g.coeffs, g.primitive_coeffs, g.h, x, K)
    sup0 = g.sup(0.0, 1.0 / (K + 1.0), 17)
    tail_bound = sup0 * (0.5 / (K + x) ** 2 + (1.0 + x) / (3.0 * (K + x) ** 3))
    scale = float(np.max(np.abs(g.values)))
    rounding = 4.0 * K * EPS * scale
    # U is positive and U 1 <= 1 (it maps 1 to -(P x)', bounded by 1 on [0,1])
    err = g.error + g.interpolation_error() + float(np.max(tail_bound)) + rounding
    return DensityProfile(head, error=err, label=f"U[{g.label}]",
                          meta={"tail_bound": tail_bound, "rounding": rounding})


def a_profile(N: int = DEFAULT_CONFIG.N) -> DensityProfile:
    return DensityProfile.from_function(lambda y: 1.0 / (y + 2.0) ** 2, N, label="a")


def b_profile(N: int = DEFAULT_CONFIG.N) -> DensityProfile:
    return DensityProfile.from_function(lambda y: 1.0 / (1.0 + 2.0 * y) ** 2, N, label="b")


@dataclass
class ContractionReport:
    max_ub_error: float
    ub_tolerance_used: float
    ua_le_half_a: bool
    min_margin: float
    error_bound: float


def wirsing_contraction_check(cfg: OperatorConfig = DEFAULT_CONFIG) -> ContractionReport:
    """``U b = 1/(2 (2+x)^2)`` and ``U a <= a/2`` on every node."""
    x = cfg.nodes
    ub = apply_wirsing_U(b_profile(cfg.N), cfg)
    ua = apply_wirsing_U(a_profile(cfg.N), cfg)
    half_a = 0.5 / (2.0 + x) ** 2
    ub_err = float(np.max(np.abs(ub.values - half_a)))
    margin = half_a - ua.values
    return ContractionReport(ub_err, ub.error, bool(np.all(margin >= -ua.error)),
                             float(np.min(margin)), ua.error)


def derivative_decay(n_max: int, cfg: OperatorConfig = DEFAULT_CONFIG):
    """``max|(1+x) g_n|`` for ``n = 1..n_max`` with ``g_n = f_n'``."""
    x = cfg.nodes
    out = []
    for fn in density_pipeline(n_max, cfg, all_iterates=True):
        out.append(float(np.max(np.abs((1.0 + x) * fn.derivative().values))))
    return np.array(out)

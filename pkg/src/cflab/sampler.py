"""Seeded sampling of digit streams from the Gauss measure.

The sampler walks the digits of a Gauss-distributed point one at a time.
After digits ``a_1..a_n`` the remaining point ``y = T^n x`` has density
proportional to ``1/((1 + t y)(1 + u y))`` with ``t = q_{n-1}/q_n`` and
``u = (p_{n-1} + q_{n-1})/(p_n + q_n)``; each new digit ``k`` maps
``t -> 1/(k + t)`` and ``u -> 1/(k + u)``.  Only the two floats ``(t, u)``
are carried, so the cost per digit is constant.
"""
from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import __version__, kernels
from .core import convergents
from .streams import DigitStream

PRNG_ALGORITHM = "numpy.random.PCG64"
SAMPLER_VERSION = 1
DEFAULT_KMAX = 10**6
CHUNK = 1 << 18


@dataclass
class SamplerState:
    t: float = 0.0
    u: float = 1.0
    rng: Optional[np.random.Generator] = field(default=None, repr=False)
    count: int = 0


def next_digit_distribution(state, kmax: int = 64):
    """Conditional law of the next digit.

    Returns ``(digits, probs)`` for ``k = 1..kmax``; the probability of every
    digit above ``kmax`` is folded into the last bucket.
    """
    t, u = (state.t, state.u) if isinstance(state, SamplerState) else state
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    total = kernels.primitive(1.0, t, u)
    k = np.arange(1, kmax + 2, dtype=np.float64)
    cdf_tail = _primitive_array(1.0 / k, t, u)
    upper, lower = cdf_tail[:-1], cdf_tail[1:]
    k = k[:-1]
    probs = (upper - lower) / total
    probs[-1] += lower[-1] / total
    return k.astype(np.int64), probs


def _primitive_array(y, t, u):
    base = y / (1.0 + u * y)
    w = (t - u) * base
    small = np.abs(w) < 1e-5
    safe = np.where(small, 1.0, w)
    ratio = np.where(small, 1.0 - w * (0.5 - w * (1.0 / 3.0 - 0.25 * w)), np.log1p(safe) / safe)
    return base * ratio


def exact_state(digits: Sequence[int], window: Optional[int] = None):
    """Exact ``(t, u)`` after ``digits`` as Fractions.

    With ``window`` only the last ``window`` digits are used, starting from
    ``t = 0, u = 1``.  The maps ``s -> 1/(k + s)`` contract, so a window of
    a hundred digits already agrees with the full state far beyond double
    precision.
    """
    if window is None:
        st = convergents(digits)
        return (Fraction(st.q_prev, st.q_cur),
                Fraction(st.p_prev + st.q_prev, st.p_cur + st.q_cur))
    t, u = Fraction(0), Fraction(1)
    for a in list(digits)[-window:]:
        t = 1 / (a + t)
        u = 1 / (a + u)
    return t, u


class StateDriftError(RuntimeError):
    pass


class GaussSampler:
    """Digit source for one Gauss-typical point.

    Parameters
    ----------
    seed : int
        Seed of the PCG64 generator; the stream is a pure function of
        ``(seed, kmax, SAMPLER_VERSION)``.
    kmax : int
        Digits above ``kmax`` are reported as ``kmax``.
    check_every : int, optional
        Debug mode: every ``check_every`` digits re-derive ``(t, u)`` exactly
        from the recent digits and record the drift.
    """

    def __init__(self, seed: int, kmax: int = DEFAULT_KMAX, backend: Optional[str] = None,
                 check_every: Optional[int] = None, drift_tol: float = 1e-12):
        if not 0 <= int(seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        self.seed = int(seed)
        self.kmax = int(kmax)
        self.backend = backend
        self.state = SamplerState(rng=np.random.Generator(np.random.PCG64(self.seed)))
        self.check_every = check_every
        self.drift_tol = drift_tol
        self.max_drift = 0.0
        self._recent = np.zeros(0, dtype=np.int64)

    def draw(self, n: int) -> np.ndarray:
        if n < 0:
            raise ValueError("n must be >= 0")
        if self.check_every:
            parts = []
            while n > 0:
                step = self.check_every - self.state.count % self.check_every
                step = min(step, n)
                parts.append(self._draw(step))
                n -= step
                if self.state.count % self.check_every == 0:
                    self._check()
            return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
        return self._draw(n)

    def _draw(self, n):
        st = self.state
        out = []
        while n > 0:
            m = min(n, CHUNK)
            v = st.rng.random(m)
            d, st.t, st.u = kernels.sample_digits(v, st.t, st.u, self.kmax, backend=self.backend)
            out.append(d)
            st.count += m
            n -= m
        digits = np.concatenate(out) if out else np.zeros(0, dtype=np.int64)
        if self.check_every:
            self._recent = np.concatenate([self._recent, digits])[-256:]
        return digits

    def _check(self):
        t, u = exact_state(self._recent.tolist(), window=256)
        drift = max(abs(float(t) - self.state.t), abs(float(u) - self.state.u))
        self.max_drift = max(self.max_drift, drift)
        if drift > self.drift_tol:
            raise StateDriftError(f"sampler state drifted by {drift:.3e} after {self.state.count} digits")

    def stream(self) -> DigitStream:
        """Unbounded stream that pulls from this sampler."""
        return DigitStream("sampler", None, producer=self.draw, meta=self.metadata(None))

    def metadata(self, count: Optional[int]) -> dict:
        return run_metadata(self.seed, count, kmax=self.kmax)


def run_metadata(seed: int, count: Optional[int], kmax: int = DEFAULT_KMAX) -> dict:
    return {
        "seed": int(seed),
        "prng_algorithm": PRNG_ALGORITHM,
        "sampler_version": SAMPLER_VERSION,
        "kmax": int(kmax),
        "count": count,
        "created_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "tool_version": __version__,
    }


def sample_stream(seed: int, n: int, kmax: int = DEFAULT_KMAX, backend: Optional[str] = None) -> DigitStream:
    """``n`` Gauss-distributed digits from ``seed`` as a finite stream."""
    sampler = GaussSampler(seed, kmax=kmax, backend=backend)
    digits = sampler.draw(n)
    return DigitStream("sampler", digits, meta=sampler.metadata(n))


def prefix_probability(digits: Sequence[int]) -> float:
    """Product of the sampler's conditional probabilities along ``digits``."""
    t, u = 0.0, 1.0
    p = 1.0
    F = kernels.primitive
    for k in digits:
        p *= (F(1.0 / k, t, u) - F(1.0 / (k + 1.0), t, u)) / F(1.0, t, u)
        t, u = 1.0 / (k + t), 1.0 / (k + u)
    return p

"""Hot numeric loops, each with a numba build and a pure numpy/python build.

The public names (``sample_digits``, ``transfer_sum``, ``wirsing_sum``,
``marker_walk``) dispatch on :data:`cflab._backend.USE_NUMBA`.  Both builds
are importable side by side so the benchmark and the backend-agreement tests
can run them against each other.
"""
import math

import numpy as np

from ._backend import HAVE_NUMBA, USE_NUMBA, numba

# --------------------------------------------------------------------------
# Gauss-measure digit sampler
#
# Given the first n digits, y = T^n x has density proportional to
# 1/((1 + t y)(1 + u y)) on [0, 1].  Its primitive from 0 is
# F(y) = log((1 + t y)/(1 + u y))/(t - u), written below as
# y/(1 + u y) * log1p(w)/w with w = (t - u) y/(1 + u y), which is stable as
# t - u -> 0 (t_n - u_n = +-1/(q_n (p_n + q_n)) vanishes geometrically).


def _primitive(y, t, u):
    base = y / (1.0 + u * y)
    w = (t - u) * base
    if abs(w) < 1e-5:
        return base * (1.0 - w * (0.5 - w * (1.0 / 3.0 - 0.25 * w)))
    return base * (math.log1p(w) / w)


def _make_sampler(primitive):
    def sample(uniforms, t, u, kmax, out):
        for i in range(uniforms.shape[0]):
            v = uniforms[i]
            total = primitive(1.0, t, u)
            # closed-form inverse of the conditional CDF gives a first guess
            target = (1.0 - v) * total
            gd = target * (t - u)
            if abs(gd) < 1e-5:
                r = target * (1.0 + gd * (0.5 + gd / 6.0))
            else:
                r = math.expm1(gd) / (t - u)
            y = r / (1.0 - r * u)
            if y <= 0.0:
                k = kmax
            else:
                z = 1.0 / y - 1.0
                if z >= kmax:
                    k = kmax
                elif z <= 1.0:
                    k = 1
                else:
                    k = int(math.ceil(z))
            # settle against the cumulative sums: digit = least k with
            # v <= P(digit <= k); ties go to the lower digit
            while k > 1 and v <= 1.0 - primitive(1.0 / k, t, u) / total:
                k -= 1
            while k < kmax and v > 1.0 - primitive(1.0 / (k + 1.0), t, u) / total:
                k += 1
            out[i] = k
            t = 1.0 / (k + t)
            u = 1.0 / (k + u)
        return t, u
    return sample


_sample_py = _make_sampler(_primitive)
primitive = _primitive

# --------------------------------------------------------------------------
# piecewise polynomials on a uniform grid of [0, 1]
#
# ``c`` has shape (order, ncells) in scipy PPoly layout: on cell i the value
# is sum_m c[m, i] * (x - i h)^(order - 1 - m).


def _ppoly_scalar(c, h, x):
    ncell = c.shape[1]
    i = int(x / h)
    if i >= ncell:
        i = ncell - 1
    elif i < 0:
        i = 0
    dx = x - i * h
    acc = c[0, i]
    for m in range(1, c.shape[0]):
        acc = acc * dx + c[m, i]
    return acc


def ppoly_eval_numpy(c, h, x):
    ncell = c.shape[1]
    i = np.clip((x / h).astype(np.int64), 0, ncell - 1)
    dx = x - i * h
    acc = c[0, i]
    for m in range(1, c.shape[0]):
        acc = acc * dx + c[m, i]
    return acc


def _make_transfer(ppoly):
    def transfer(c, h, nodes, kmax, out):
        for j in range(nodes.shape[0]):
            x = nodes[j]
            s = 0.0
            # small terms first
            for k in range(kmax, 0, -1):
                a = k + x
                s += (1.0 + x) / (a * (a + 1.0)) * ppoly(c, h, 1.0 / a)
            out[j] = s
    return transfer


def _transfer_numpy(c, h, nodes, kmax, out, block=512):
    acc = np.zeros(nodes.shape[0])
    x = nodes[None, :]
    for hi in range(kmax, 0, -block):
        lo = max(hi - block, 0)
        k = np.arange(hi, lo, -1, dtype=np.float64)[:, None]
        a = k + x
        w = (1.0 + x) / (a * (a + 1.0))
        acc += (w * ppoly_eval_numpy(c, h, 1.0 / a)).sum(axis=0)
    out[:] = acc


def _make_wirsing(ppoly):
    def wirsing(c, ca, h, nodes, kmax, out):
        for j in range(nodes.shape[0]):
            x = nodes[j]
            s = 0.0
            for k in range(kmax, 0, -1):
                a = k + x
                y1 = 1.0 / a
                y0 = 1.0 / (a + 1.0)
                s += k / ((a + 1.0) * (a + 1.0)) * (ppoly(ca, h, y1) - ppoly(ca, h, y0))
                s += (1.0 + x) / (a * a * a * (a + 1.0)) * ppoly(c, h, y1)
            out[j] = s
    return wirsing


def _wirsing_numpy(c, ca, h, nodes, kmax, out, block=512):
    acc = np.zeros(nodes.shape[0])
    x = nodes[None, :]
    for hi in range(kmax, 0, -block):
        lo = max(hi - block, 0)
        k = np.arange(hi, lo, -1, dtype=np.float64)[:, None]
        a = k + x
        y1 = 1.0 / a
        y0 = 1.0 / (a + 1.0)
        term = k / ((a + 1.0) ** 2) * (ppoly_eval_numpy(ca, h, y1) - ppoly_eval_numpy(ca, h, y0))
        term += (1.0 + x) / (a ** 3 * (a + 1.0)) * ppoly_eval_numpy(c, h, y1)
        acc += term.sum(axis=0)
    out[:] = acc


# --------------------------------------------------------------------------
# marker automaton


def _marker_walk_py(classes, perms, start, out):
    m = start
    out[0] = m
    for i in range(classes.shape[0]):
        m = perms[classes[i]][m]
        out[i + 1] = m


# --------------------------------------------------------------------------
# builds and dispatch

if HAVE_NUMBA:
    _ppoly_nb = numba.njit(cache=True)(_ppoly_scalar)
    _primitive_nb = numba.njit(cache=True)(_primitive)
    _sample_nb = numba.njit(cache=False)(_make_sampler(_primitive_nb))
    _transfer_nb = numba.njit(cache=False, parallel=False)(_make_transfer(_ppoly_nb))
    _wirsing_nb = numba.njit(cache=False)(_make_wirsing(_ppoly_nb))
    _marker_walk_nb = numba.njit(cache=True)(_marker_walk_py)
else:  # pragma: no cover
    _sample_nb = _transfer_nb = _wirsing_nb = _marker_walk_nb = None

BUILDS = {
    "numpy": {
        "sample": _sample_py,
        "transfer": _transfer_numpy,
        "wirsing": _wirsing_numpy,
        "marker_walk": _marker_walk_py,
    },
    "numba": {
        "sample": _sample_nb,
        "transfer": _transfer_nb,
        "wirsing": _wirsing_nb,
        "marker_walk": _marker_walk_nb,
    },
}


def _pick(name, backend=None):
    if backend is None:
        backend = "numba" if USE_NUMBA else "numpy"
    fn = BUILDS[backend][name]
    if fn is None:
        raise RuntimeError(f"backend {backend!r} is not available")
    return fn


def sample_digits(uniforms, t, u, kmax, backend=None):
    """Draw one digit per uniform deviate; returns ``(digits, t, u)``."""
    fn = _pick("sample", backend)
    uniforms = np.ascontiguousarray(uniforms, dtype=np.float64)
    if fn is _sample_py:
        # plain floats are several times faster than numpy scalars here
        out = [0] * uniforms.shape[0]
        t, u = fn(_Seq(uniforms.tolist()), float(t), float(u), int(kmax), out)
        return np.asarray(out, dtype=np.int64), t, u
    out = np.empty(uniforms.shape[0], dtype=np.int64)
    t, u = fn(uniforms, float(t), float(u), int(kmax), out)
    return out, t, u


class _Seq(list):
    @property
    def shape(self):
        return (len(self),)


def transfer_sum(c, h, nodes, kmax, backend=None):
    """``sum_{k<=kmax} (1+x)/((k+x)(k+1+x)) f(1/(k+x))`` at each node."""
    out = np.empty(nodes.shape[0])
    _pick("transfer", backend)(np.ascontiguousarray(c), float(h),
                               np.ascontiguousarray(nodes, dtype=np.float64), int(kmax), out)
    return out


def wirsing_sum(c, ca, h, nodes, kmax, backend=None):
    """Truncated Wirsing series from the spline ``c`` and its primitive ``ca``."""
    out = np.empty(nodes.shape[0])
    _pick("wirsing", backend)(np.ascontiguousarray(c), np.ascontiguousarray(ca), float(h),
                              np.ascontiguousarray(nodes, dtype=np.float64), int(kmax), out)
    return out


def marker_walk(classes, perms, start, backend=None):
    """Marker trajectory: ``out[i]`` is the marker after ``i`` steps (0-based labels)."""
    fn = _pick("marker_walk", backend)
    classes = np.ascontiguousarray(classes, dtype=np.int64)
    perms = np.ascontiguousarray(perms, dtype=np.int64)
    if fn is _marker_walk_py:
        out = [0] * (classes.shape[0] + 1)
        fn(_Seq(classes.tolist()), perms.tolist(), int(start), out)
        return np.asarray(out, dtype=np.int64)
    out = np.empty(classes.shape[0] + 1, dtype=np.int64)
    fn(classes, perms, int(start), out)
    return out

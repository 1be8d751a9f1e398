"""Kernel backend selection.

Hot loops are written once and compiled with numba when it is importable.
Set ``CFLAB_DISABLE_NUMBA=1`` to force the pure-numpy/python path, e.g. for
debugging or on platforms without an LLVM toolchain.
"""
import os

try:
    import numba
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

DISABLED = os.environ.get("CFLAB_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")
USE_NUMBA = HAVE_NUMBA and not DISABLED


def thread_cap():
    """Worker cap from ``CFLAB_THREADS`` (defaults to 1)."""
    raw = os.environ.get("CFLAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"CFLAB_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from cflab import kernels
from cflab._backend import HAVE_NUMBA
from cflab.transfer import DensityProfile, f1_values

pytestmark = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")


def test_ppoly_builds_agree_with_scipy(rng):
    prof = DensityProfile.from_function(lambda x: np.sin(3 * x) + x ** 2, 128)
    x = rng.random(500)
    ref = prof.spline(x)
    assert np.allclose(kernels.ppoly_eval_numpy(prof.coeffs, prof.h, x), ref, atol=1e-15, rtol=0)
    nb = np.array([kernels._ppoly_nb(prof.coeffs, prof.h, v) for v in x])
    assert np.allclose(nb, ref, atol=1e-15, rtol=0)


def test_transfer_and_wirsing_builds_agree():
    x = np.linspace(0, 1, 129)
    prof = DensityProfile(f1_values(x))
    for name, call in (
        ("transfer", lambda b: kernels.transfer_sum(prof.coeffs, prof.h, x, 3000, backend=b)),
        ("wirsing", lambda b: kernels.wirsing_sum(prof.coeffs, prof.primitive_coeffs, prof.h, x, 3000, backend=b)),
    ):
        assert np.max(np.abs(call("numba") - call("numpy"))) < 1e-14, name


def test_marker_walk_builds_agree(rng):
    classes = rng.integers(0, 2, 5000)
    perms = np.array([[1, 2, 0], [0, 2, 1]])
    a = kernels.marker_walk(classes, perms, 2, backend="numba")
    b = kernels.marker_walk(classes, perms, 2, backend="numpy")
    assert np.array_equal(a, b) and a.size == 5001 and a[0] == 2


def test_unknown_backend():
    with pytest.raises(KeyError):
        kernels.sample_digits(np.zeros(1), 0.0, 1.0, 10, backend="fortran")


def test_env_flag_selects_numpy_build():
    code = ("import json; from cflab import _backend; from cflab.sampler import GaussSampler;"
            "print(json.dumps([_backend.USE_NUMBA, _backend.backend_name(), GaussSampler(4).draw(50).tolist()]))")
    runs = {}
    for flag in ("1", "0"):
        env = dict(os.environ, CFLAB_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        runs[flag] = json.loads(out.stdout)
    assert runs["1"][:2] == [False, "numpy"]
    assert runs["0"][:2] == [True, "numba"]
    assert runs["1"][2] == runs["0"][2]

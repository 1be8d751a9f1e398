"""Time the numba and numpy builds of every hot kernel on the same inputs.

    python benchmarks/bench_kernels.py [--quick]

Prints one row per kernel with both timings, the speed-up and the largest
difference between the two outputs.
"""
import argparse
import time

import numpy as np

from cflab import kernels
from cflab.transfer import DensityProfile, OperatorConfig, f1_values


def _best(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(quick):
    n_digits = 20_000 if quick else 200_000
    cfg = OperatorConfig(K=1000 if quick else 10_000, N=256 if quick else 2048)
    prof = DensityProfile(f1_values(cfg.nodes))
    u = np.random.default_rng(0).random(n_digits)
    digits = kernels.sample_digits(u, 0.0, 1.0, 10**6, backend="numba")[0]
    classes = (digits == 1).astype(np.int64)
    perms = np.array([[0, 1, 2], [1, 2, 0]], dtype=np.int64)
    return {
        f"sample_digits (n={n_digits})":
            lambda b: kernels.sample_digits(u, 0.0, 1.0, 10**6, backend=b)[0],
        f"transfer_sum (K={cfg.K}, N={cfg.N})":
            lambda b: kernels.transfer_sum(prof.coeffs, prof.h, cfg.nodes, cfg.K, backend=b),
        f"wirsing_sum (K={cfg.K}, N={cfg.N})":
            lambda b: kernels.wirsing_sum(prof.coeffs, prof.primitive_coeffs, prof.h, cfg.nodes, cfg.K, backend=b),
        f"marker_walk (n={n_digits})":
            lambda b: kernels.marker_walk(classes, perms, 0, backend=b),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(f"{'kernel':40s} {'numba s':>10s} {'numpy s':>10s} {'speed-up':>9s} {'max diff':>10s}")
    for name, run in cases(args.quick).items():
        run("numba")                      # compile outside the timing
        t_nb, a = _best(lambda: run("numba"), args.repeat)
        t_np, b = _best(lambda: run("numpy"), max(1, args.repeat - 2))
        diff = float(np.max(np.abs(np.asarray(a, float) - np.asarray(b, float))))
        print(f"{name:40s} {t_nb:10.4f} {t_np:10.4f} {t_np / t_nb:9.1f} {diff:10.2e}")


if __name__ == "__main__":
    main()

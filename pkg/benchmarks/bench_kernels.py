"""Numba vs numpy timings for the hot kernels.

Run with ``python3 benchmarks/bench_kernels.py``. Both paths are called
directly, so one process compares them regardless of NISAC_DISABLE_NUMBA.
Each kernel is warmed up once (JIT compile) before timing.
"""

import argparse
import time

import numpy as np

from nisac import _accel
from nisac.channel_model import _path_sum_loops, _path_sum_numpy
from nisac.geometry_maps import _coverage_count_loops, _coverage_count_numpy
from nisac.nn.kernels import _col2im_loops, _col2im_numpy, _im2col_loops, _im2col_numpy
from nisac.sensing_estimator import _chol_solve_loops, _chol_solve_numpy


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    x = rng.standard_normal((256, 4, 32, 16))
    cols = _im2col_numpy(x, 3)
    tx = rng.uniform(-1, 1, (8, 3))
    rx = rng.uniform(-1, 1, (8, 3))
    pts = rng.uniform(-2, 2, (64, 3))
    refl = np.full(64, 0.7)
    freqs = 6e9 + np.arange(128) * 312.5e3
    a = rng.standard_normal((4096, 4, 4)) + 1j * rng.standard_normal((4096, 4, 4))
    g = a @ np.conj(np.swapaxes(a, -1, -2)) + 0.1 * np.eye(4)
    b = rng.standard_normal((4096, 4, 4)) + 1j * rng.standard_normal((4096, 4, 4))
    lo, hi = np.zeros(2), np.ones(2)
    flo, fhi = np.array([[0.2, 0.2]]), np.array([[0.7, 0.7]])
    return {
        "im2col [256x4x32x16, k=3]": (lambda: _im2col_loops(x, 3), lambda: _im2col_numpy(x, 3)),
        "col2im [256x4x32x16, k=3]": (lambda: _col2im_loops(cols, 256, 4, 32, 16, 3),
                                      lambda: _col2im_numpy(cols, 256, 4, 32, 16, 3)),
        "path sum [8x8 arrays, 64 pts, 128 sc]": (
            lambda: _path_sum_loops(tx, rx, pts, refl, freqs, 1e-3),
            lambda: _path_sum_numpy(tx, rx, pts, refl, freqs, 1e-3)),
        "hermitian solve [4096 x 4x4]": (lambda: _chol_solve_loops(g, b),
                                         lambda: _chol_solve_numpy(g, b)),
        "coverage MC [1e6 points]": (lambda: _coverage_count_loops(lo, hi, flo, fhi, 10**6, 0),
                                     lambda: _coverage_count_numpy(lo, hi, flo, fhi, 10**6, 0)),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        print("numba disabled: both columns time the same numpy path")
    rng = np.random.default_rng(0)
    print(f"{'kernel':42s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for name, (fast, slow) in cases(rng).items():
        t_fast = best_of(fast, args.repeat)
        t_slow = best_of(slow, args.repeat)
        print(f"{name:42s} {1e3 * t_fast:10.2f} {1e3 * t_slow:10.2f} {t_slow / t_fast:7.1f}x")


if __name__ == "__main__":
    main()

"""Numba vs numpy timings for the hot kernels.

Run ``python3 benchmarks/bench_kernels.py``. Each case runs once to warm the
JIT cache, then reports the best of ``--repeat`` runs per backend and the
max abs difference between the two outputs.
"""

import argparse
import time

import numpy as np

from fracou import _accel, mlf, sampling, shotnoise
from fracou.fracops import TimeGrid, memory_sum


def best_of(fn, repeat):
    fn()  # warm-up (JIT compile, caches)
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases():
    rng = np.random.default_rng(0)
    x = -np.abs(rng.standard_cauchy(200_000)) * 5.0
    yield "ml_array (2e5 pts, beta=0.6)", lambda: mlf.ml(0.6, 1.0, x)

    c = rng.random(8192)
    du = rng.standard_normal(8192)
    yield "memory_sum (n=8192)", lambda: memory_sum(c, du)

    spec = shotnoise.ShotNoiseSpec(1.0, 0.5, n=100)
    grid = TimeGrid(0.0, 1.0, 8)
    yield "shot-noise accumulate (2000 paths, n=100)", lambda: shotnoise.simulate_un(spec, grid, 2000, 1).paths

    L = np.tril(rng.random((256, 256)))
    Z = rng.standard_normal((2000, 256))
    yield "lower-triangular apply (2000 x 256)", lambda: sampling._lower_apply(Z, L)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(f"{'case':45s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s} {'max diff':>10s}")
    for name, fn in cases():
        with _accel.use_numba(True):
            tn, a = best_of(fn, args.repeat)
        with _accel.use_numba(False):
            tp, b = best_of(fn, args.repeat)
        diff = float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
        print(f"{name:45s} {tn:10.4f} {tp:10.4f} {tp / tn:8.1f} {diff:10.2e}")


if __name__ == "__main__":
    main()

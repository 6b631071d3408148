"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--n 100000] [--repeat 5]

The first numba call (compilation, or loading the on-disk cache) is timed
separately and excluded from the steady-state numbers.
"""
import argparse
import time

import numpy as np

from weightalloc._kernels import NUMBA_KERNELS, NUMPY_KERNELS
from weightalloc._rng import generator


def _best(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def cases(n):
    rng = generator(12345)
    x = rng.exponential(size=n)
    w = rng.random(n)
    cdf = np.sort(rng.random(n))
    nb = min(n, 2000)  # the brute-force double sum is quadratic
    mids = np.sort(rng.random(nb))
    a = rng.standard_normal(nb)
    return {
        "exact_sum": (x,),
        "exact_dot": (x, w),
        "window_moments": (x, int(np.ceil(np.sqrt(n)))),
        "bridge_double_sum": (mids, a),
        "ks_sorted": (cdf,),
    }


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("--n", type=int, default=100_000, help="array length (default 100000)")
    p.add_argument("--repeat", type=int, default=5, help="timing repeats, best-of (default 5)")
    args = p.parse_args()

    print(f"{'kernel':<20}{'first numba':>14}{'numba':>12}{'numpy':>12}{'speedup':>10}")
    for name, a in cases(args.n).items():
        t0 = time.perf_counter()
        NUMBA_KERNELS[name](*a)
        first = time.perf_counter() - t0
        t_nb = _best(NUMBA_KERNELS[name], a, args.repeat)
        t_np = _best(NUMPY_KERNELS[name], a, args.repeat)
        print(f"{name:<20}{first:>13.4f}s{t_nb:>11.5f}s{t_np:>11.5f}s{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()

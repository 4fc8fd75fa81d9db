"""Timing of the compiled Weiszfeld kernel against the NumPy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both kernels run on identical inputs; the script also reports the largest
coordinate difference between their answers.
"""
import argparse
import sys
import timeit

import numpy as np

from manifold_stat import _kernels_py

try:
    from manifold_stat import _kernels
except ImportError:
    _kernels = None

CASES = [(50, 3), (500, 3), (5000, 3), (500, 9), (5000, 9)]


def run_case(mod, x, start):
    return mod.weiszfeld(x, start, 1e-10, 10_000, 1e-12 * (1.0 + np.abs(x).max()))


def best_time(mod, x, start, repeat):
    return min(timeit.repeat(lambda: run_case(mod, x, start), number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled kernel not built; only the fallback is available", file=sys.stderr)
    rng = np.random.default_rng(args.seed)
    print(f"{'n':>6} {'s':>3} {'python [ms]':>12} {'cython [ms]':>12} {'speedup':>8} {'max diff':>10}")
    for n, s in CASES:
        x = np.ascontiguousarray(rng.standard_normal((n, s)) + 0.5)
        start = x.mean(axis=0)
        t_py = best_time(_kernels_py, x, start, args.repeat)
        y_py = run_case(_kernels_py, x, start)[0]
        if _kernels is None:
            print(f"{n:>6} {s:>3} {1e3 * t_py:>12.2f} {'-':>12} {'-':>8} {'-':>10}")
            continue
        t_cy = best_time(_kernels, x, start, args.repeat)
        y_cy = np.asarray(run_case(_kernels, x, start)[0])
        diff = float(np.abs(y_cy - y_py).max())
        print(f"{n:>6} {s:>3} {1e3 * t_py:>12.2f} {1e3 * t_cy:>12.2f} {t_py / t_cy:>8.1f} {diff:>10.1e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Compares the compiled and pure-Python nearest-scan kernels.

Run with `python3 benchmarks/bench_kernels.py`.  Set DISPATCHSIM_PURE=1
before importing to force the pure fallback in the package itself; this
script always times both implementations directly.
"""

import time

import numpy as np

from dispatchsim.kernels import IMPLEMENTATION, _kernels_py as pure

try:
    from dispatchsim.kernels import _speedups as compiled
except ImportError:
    compiled = None


def bench(fn, xs, ys, mask, repeats):
    ax, ay = 0.37, 0.61
    start = time.perf_counter()
    for _ in range(repeats):
        fn(xs, ys, mask, ax, ay)
    return (time.perf_counter() - start) / repeats


def main():
    print(f"package selected implementation: {IMPLEMENTATION}")
    rng = np.random.default_rng(1)
    for n in (10, 100, 1_000, 10_000, 100_000):
        xs = rng.uniform(0, 1, n)
        ys = rng.uniform(0, 1, n)
        mask = (rng.uniform(0, 1, n) < 0.5).astype(np.uint8)
        repeats = max(5, 200_000 // n)
        t_py = bench(pure.nearest_index_masked, xs, ys, mask, repeats)
        row = f"n={n:>7}  pure {t_py * 1e6:10.2f} us"
        if compiled is not None:
            t_cy = bench(compiled.nearest_index_masked, xs, ys, mask, repeats)
            row += f"  compiled {t_cy * 1e6:10.2f} us  speedup {t_py / t_cy:6.1f}x"
            assert compiled.nearest_index_masked(
                xs, ys, mask, 0.37, 0.61
            ) == pure.nearest_index_masked(xs, ys, mask, 0.37, 0.61)
        else:
            row += "  (compiled extension unavailable)"
        print(row)


if __name__ == "__main__":
    main()

"""Compiled kernels against the numpy fallback.

Run ``python3 benchmarks/bench_kernels.py``; prints one line per kernel
with the best-of-``repeat`` time for each backend and the speed-up.
"""

import argparse
import timeit

import numpy as np

from wstarhom import kernels


def cases(rng):
    F = rng.normal(size=(40, 2))
    a, b = rng.normal(size=40), rng.normal(size=40)
    P = rng.uniform(-50, 50, (20000, 2))
    D = rng.normal(size=(4, 40000))
    u2 = rng.normal(size=(81, 81))
    u1 = rng.normal(size=2001)
    W = np.abs(rng.normal(size=(4, 79, 79)))
    src = rng.normal(size=(79, 79))
    c4 = np.zeros(4)
    h = 0.05
    tau2 = 1.0 / (0.1 + 2 * 2 * 2.0 * 4 / h ** 2)
    tau1 = 1.0 / (0.1 + 2 * 2.0 / h ** 2)
    return {
        "trig_eval (40 terms, 2e4 points)": lambda m: m.trig_eval(F, a, b, 0.5, P),
        "pucci_weights_2d (4e4 nodes)": lambda m: m.pucci_weights_2d(D, 1.0, 2.0),
        "sweep_pucci_1d (2001 nodes, 50 steps)":
            lambda m: m.sweep_pucci_1d(u1.copy(), h, tau1, 1.0, 2.0, 1.0, c4[:1], 0.1, 50),
        "sweep_pucci_2d (81^2 nodes, 50 steps)":
            lambda m: m.sweep_pucci_2d(u2.copy(), h, tau2, 1.0, 2.0, 1.0, c4, 0.1, 50),
        "sweep_weighted (81^2 nodes, 50 steps)":
            lambda m: m.sweep_weighted(u2.copy(), W, src, h, tau2, 0.1, 50),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    py = kernels.backend_module("numpy")
    try:
        cy = kernels.backend_module("cython")
    except ImportError:
        cy = None
        print("compiled kernels not built; timing the numpy fallback only")
    rng = np.random.default_rng(0)
    print(f"{'kernel':40s} {'numpy [ms]':>11s} {'cython [ms]':>12s} {'speed-up':>9s}")
    for name, fn in cases(rng).items():
        t_py = min(timeit.repeat(lambda: fn(py), number=1, repeat=args.repeat)) * 1e3
        if cy is None:
            print(f"{name:40s} {t_py:11.2f}")
            continue
        t_cy = min(timeit.repeat(lambda: fn(cy), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:40s} {t_py:11.2f} {t_cy:12.2f} {t_py / t_cy:8.1f}x")


if __name__ == "__main__":
    main()

"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--steps N] [--repeat R]

Prints one row per kernel with the best-of-R time for each implementation
and the speedup. Without a built extension only the Python column is filled.
"""
import argparse
import importlib
import time

import numpy as np

from pacer import _kernels_py


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(impl, steps, k, window, rng):
    table = -np.sort(rng.exponential(0.5, size=(steps, k)), axis=1)
    rows = table.tolist()
    u = impl.uncertainty_rows(table, k)
    labels = rng.integers(0, 4, size=(20_000, 33))
    weights = rng.lognormal(0.0, 0.5, size=(20_000, 33))

    def push_loop():
        core = impl.StabilityCore(window, k)
        for row in rows:
            core.update_logprobs(row)

    return {
        "StabilityCore.update_logprobs": push_loop,
        "uncertainty_rows": lambda: impl.uncertainty_rows(table, k),
        "stability_trajectory": lambda: impl.stability_trajectory(u, window),
        "weighted_vote_errors": lambda: impl.weighted_vote_errors(labels, weights, 4),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--k", type=int, default=5)
    ap.add_argument("--window", type=int, default=1024)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    try:
        compiled = importlib.import_module("pacer._kernels")
    except ImportError:
        compiled = None

    impls = [("python", _kernels_py)] + ([("cython", compiled)] if compiled else [])
    timings = {}
    for name, impl in impls:
        rng = np.random.default_rng(0)
        for kernel, fn in cases(impl, args.steps, args.k, args.window, rng).items():
            timings.setdefault(kernel, {})[name] = _best(fn, args.repeat)

    print(f"steps={args.steps} k={args.k} window={args.window} best of {args.repeat}")
    print(f"{'kernel':<32}{'python s':>12}{'cython s':>12}{'speedup':>10}")
    for kernel, t in timings.items():
        py, cy = t["python"], t.get("cython")
        cy_s = f"{cy:12.4f}" if cy is not None else f"{'-':>12}"
        speed = f"{py / cy:9.1f}x" if cy else f"{'-':>10}"
        print(f"{kernel:<32}{py:12.4f}{cy_s}{speed}")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Benchmark the compiled conv1d kernel against the numpy fallback.

Times forward and backward passes at several problem sizes and prints the
per-call medians plus the speedup of the compiled path. Run from the repo
root after an editable install:

    python3 scripts/bench_kernels.py [--repeats 200] [--dtype float32|float64]
"""

import argparse
import statistics
import time

import numpy as np

from videosemnet._kernels import BACKEND, _convnp as numpy_backend

try:
    from videosemnet._kernels import _convcy as compiled
except ImportError:
    compiled = None

# (time steps, in channels, out channels, kernel width)
CASES = [
    (16, 64, 128, 3),
    (16, 128, 32, 3),
    (64, 64, 128, 3),
    (256, 64, 128, 3),
    (256, 128, 128, 5),
]


def bench(fn, repeats):
    # warm up, then take the median to shrug off scheduler noise
    for _ in range(3):
        fn()
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return statistics.median(times)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=200)
    parser.add_argument("--dtype", choices=("float32", "float64"), default="float64")
    args = parser.parse_args()
    dtype = np.dtype(args.dtype)

    if compiled is None:
        print("compiled kernel not available; build it with `pip install -e .`")
        return 1

    print(f"active backend at import: {BACKEND}; dtype {dtype.name}; "
          f"median of {args.repeats} runs, times in microseconds")
    header = f"{'T x Cin -> Cout (k)':>22}  {'pass':>8}  {'numpy':>9}  {'compiled':>9}  {'speedup':>7}"
    print(header)
    print("-" * len(header))

    rng = np.random.default_rng(0)
    for T, cin, cout, k in CASES:
        x = rng.standard_normal((T, cin)).astype(dtype)
        w = rng.standard_normal((k, cin, cout)).astype(dtype)
        b = rng.standard_normal(cout).astype(dtype)
        g = rng.standard_normal((T, cout)).astype(dtype)

        label = f"{T} x {cin} -> {cout} ({k})"
        pairs = [
            ("forward",
             lambda: numpy_backend.conv1d_forward(x, w, b),
             lambda: compiled.conv1d_forward(x, w, b)),
            ("backward",
             lambda: numpy_backend.conv1d_backward(x, w, g),
             lambda: compiled.conv1d_backward(x, w, g)),
        ]
        for name, np_fn, cy_fn in pairs:
            t_np = bench(np_fn, args.repeats) * 1e6
            t_cy = bench(cy_fn, args.repeats) * 1e6
            print(f"{label:>22}  {name:>8}  {t_np:9.1f}  {t_cy:9.1f}  {t_np / t_cy:6.2f}x")
            label = ""
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Times each hot kernel and one full flow estimation on both backends and
prints a table with the speedup factors.

    python3 benchmarks/bench_kernels.py [--size 128] [--repeats 5]
"""

import argparse
import time

import numpy as np

from biwoof import _kernels
from biwoof.flow import TvL1Params, estimate_tvl1


def _smooth(img, passes=3):
    k = np.ones(5) / 5.0
    for _ in range(passes):
        img = np.apply_along_axis(lambda m: np.convolve(m, k, mode="same"),
                                  0, img)
        img = np.apply_along_axis(lambda m: np.convolve(m, k, mode="same"),
                                  1, img)
    return img


def make_inputs(size, rng):
    big = _smooth(rng.random((size + 8, size + 8)))
    ref = np.ascontiguousarray(big[4:4 + size, 4:4 + size])
    tgt = np.ascontiguousarray(big[2:2 + size, 3:3 + size])
    u = rng.normal(0.0, 1.5, (size, size))
    v = rng.normal(0.0, 1.5, (size, size))
    angles = 2 * np.pi * np.arange(8) / 8
    offs = (np.cos(angles), np.sin(angles))
    i1wx = rng.normal(0, 1, (size, size))
    i1wy = rng.normal(0, 1, (size, size))
    grad = i1wx ** 2 + i1wy ** 2
    rho = rng.normal(0, 1, (size, size))
    return ref, tgt, u, v, offs, (i1wx, i1wy, grad, rho)


def bench(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    if "native" not in _kernels.available_backends():
        raise SystemExit("compiled backend not built; nothing to compare")

    rng = np.random.default_rng(0)
    ref, tgt, u, v, offs, inner = make_inputs(args.size, rng)
    size = args.size

    def timed_set(mod):
        i1wx, i1wy, grad, rho = inner

        def run_inner():
            u1 = np.zeros((size, size))
            u2 = np.zeros((size, size))
            duals = [np.zeros((size, size)) for _ in range(4)]
            mod.tvl1_inner(i1wx, i1wy, grad, rho, u1, u2, *duals,
                           0.045, 0.3, 0.25 / 0.3, 0.15, 25, 0.0, None)

        return {
            "warp_bilinear": lambda: mod.warp_bilinear(ref, u, v),
            "median_3x3": lambda: mod.median_3x3(ref),
            "lbp_codes": lambda: mod.lbp_codes(ref, offs[0], offs[1], 1, 1),
            "tvl1_inner (25 it)": run_inner,
        }

    results = {}
    for name in ("numpy", "native"):
        mod = _kernels._BACKENDS[name]
        results[name] = {label: bench(fn, args.repeats)
                         for label, fn in timed_set(mod).items()}

    prev = _kernels.set_backend("numpy")
    t_numpy = bench(lambda: estimate_tvl1(ref, tgt), max(2, args.repeats // 2))
    _kernels.set_backend("native")
    t_native = bench(lambda: estimate_tvl1(ref, tgt),
                     max(2, args.repeats // 2))
    _kernels.set_backend(prev)

    print(f"\nkernel timings at {size}x{size} "
          f"(best of {args.repeats}, seconds)")
    print(f"{'kernel':<22}{'numpy':>12}{'native':>12}{'speedup':>10}")
    for label in results["numpy"]:
        tn = results["numpy"][label]
        tc = results["native"][label]
        print(f"{label:<22}{tn:>12.6f}{tc:>12.6f}{tn / tc:>9.1f}x")
    print(f"{'estimate_tvl1':<22}{t_numpy:>12.6f}{t_native:>12.6f}"
          f"{t_numpy / t_native:>9.1f}x")


if __name__ == "__main__":
    main()

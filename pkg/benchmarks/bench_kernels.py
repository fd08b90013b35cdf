#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Runs each hot kernel on 512x512 inputs (the engine's working resolution)
and prints a comparison table. A brute-force reference timing is included
for the smallest case to show why the kernels exist at all.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from coedit._kernels import python as kpy

try:
    from coedit._kernels import _native as knat
except ImportError:
    knat = None


def timeit(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def brute_dilate(bits: np.ndarray, radius: int) -> np.ndarray:
    h, w = bits.shape
    out = np.zeros((h, w), dtype=np.uint8)
    ys, xs = np.nonzero(bits)
    r2 = radius * radius
    for y in range(h):
        for x in range(w):
            out[y, x] = bool(((ys - y) ** 2 + (xs - x) ** 2 <= r2).any())
    return out


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(42)
    mask = (rng.random((512, 512)) < 0.01).astype(np.uint8)
    img_a = rng.integers(0, 256, (512, 512, 3), dtype=np.uint8)
    img_b = rng.integers(0, 256, (512, 512, 3), dtype=np.uint8)

    rows = []
    for radius in (8, 32, 64):
        py = timeit(lambda: kpy.dilate_disc(mask, radius), args.repeats)
        nat = timeit(lambda: knat.dilate_disc(mask, radius), args.repeats) if knat else None
        rows.append((f"dilate_disc r={radius}", py, nat))
        if knat is not None:
            assert (knat.dilate_disc(mask, radius) == kpy.dilate_disc(mask, radius)).all()

    py = timeit(lambda: kpy.count_changed(img_a, img_b, 8), args.repeats)
    nat = timeit(lambda: knat.count_changed(img_a, img_b, 8), args.repeats) if knat else None
    rows.append(("count_changed", py, nat))

    py = timeit(lambda: kpy.sq_diff_sum(img_a, img_b), args.repeats)
    nat = timeit(lambda: knat.sq_diff_sum(img_a, img_b), args.repeats) if knat else None
    rows.append(("sq_diff_sum", py, nat))

    small = (rng.random((64, 64)) < 0.02).astype(np.uint8)
    brute = timeit(lambda: brute_dilate(small, 8), 1)
    rows.append(("dilate 64x64 brute-force (reference)", brute, None))

    print(f"{'kernel':38s} {'python':>12s} {'native':>12s} {'speedup':>9s}")
    for name, py, nat in rows:
        if nat is None:
            print(f"{name:38s} {py * 1e3:10.2f}ms {'-':>12s} {'-':>9s}")
        else:
            print(f"{name:38s} {py * 1e3:10.2f}ms {nat * 1e3:10.2f}ms {py / nat:8.1f}x")
    if knat is None:
        print("\ncompiled extension not built; only the fallback was timed")


if __name__ == "__main__":
    main()

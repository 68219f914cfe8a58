#!/usr/bin/env python3
"""Benchmark the vector-field reduction across mask sizes and densities.

Prints reduction time, critical-cell fraction and the component count
cross-check per configuration. The 512x512 dense row is the regression
figure tracked by the test suite (target: <= 5% critical cells).

Usage: python scripts/benchmark_reduction.py [--sizes 256,512,1024]
"""

import argparse
import time

import numpy as np

from neurotopo import BinaryImage, build_complex, build_greedy_dvf, apply_field, label_components


def bench(size: int, density: float, rng) -> None:
    mask = BinaryImage(rng.random((size, size)) < density)
    t0 = time.perf_counter()
    cx = build_complex(mask)
    t_build = time.perf_counter() - t0

    t0 = time.perf_counter()
    field = build_greedy_dvf(cx)
    t_field = time.perf_counter() - t0

    critical = cx.total_cells - 2 * field.n_pairs
    frac = critical / cx.total_cells if cx.total_cells else 0.0

    t0 = time.perf_counter()
    crit = apply_field(cx, field)
    b0, b1 = crit.betti()
    t_reduce = time.perf_counter() - t0

    assert b0 == label_components(mask, 8).count
    print(
        f"{size:5d}  p={density:.2f}  cells={cx.total_cells:9d}  "
        f"build={t_build:6.2f}s  field={t_field:6.2f}s  reduce={t_reduce:6.2f}s  "
        f"critical={frac * 100:5.2f}%  b0={b0} b1={b1}"
    )


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", default="256,512,1024")
    parser.add_argument("--densities", default="0.3,0.5,0.7")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    # warm the jitted kernels so the table shows steady-state numbers
    build_greedy_dvf(build_complex(BinaryImage(np.ones((8, 8), dtype=bool))))

    print(" size  density         cells      build     field    reduce  critical")
    for size in (int(s) for s in args.sizes.split(",")):
        for density in (float(d) for d in args.densities.split(",")):
            bench(size, density, rng)


if __name__ == "__main__":
    main()

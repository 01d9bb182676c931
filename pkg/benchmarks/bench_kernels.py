#!/usr/bin/env python3
"""Benchmark the compiled kernel extension against the pure NumPy twin.

Times the primitive kernels at the shapes the training pipelines
actually use (desk-scale hidden sizes, minibatch rows) plus a few larger
shapes where BLAS should take over. Median-of-repeats over many inner
iterations; prints a table and optionally a CSV.

Usage:
    python benchmarks/bench_kernels.py [--csv out.csv] [--repeats 7]
"""

import argparse
import time

import numpy as np

from marlperf.numerics.backend import HAVE_COMPILED, get_backend

AFFINE_SHAPES = [(4, 16, 5), (32, 64, 64), (256, 64, 64), (256, 152, 64), (1024, 256, 256)]
ELTWISE_SHAPES = [(4, 5), (64, 64), (256, 64), (1024, 256)]


def timeit(fn, repeats, inner):
    best = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn()
        best.append((time.perf_counter() - t0) / inner)
    return float(np.median(best))


def bench_case(name, make_args, call, repeats):
    rows = []
    for shape in make_args.shapes:
        args = make_args(shape)
        inner = max(3, int(2e5 / max(np.prod(shape), 1)))
        times = {}
        for backend_name in ("pure", "compiled"):
            if backend_name == "compiled" and not HAVE_COMPILED:
                times[backend_name] = float("nan")
                continue
            backend = get_backend(backend_name)
            times[backend_name] = timeit(
                lambda: call(backend, *args), repeats, inner
            )
        rows.append((name, shape, times["pure"], times["compiled"]))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--csv", default=None, help="also write results as CSV")
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    rows = []

    def affine_args(shape):
        m, k, n = shape
        return (
            rng.standard_normal((m, k)),
            rng.standard_normal((k, n)),
            rng.standard_normal(n),
        )

    affine_args.shapes = AFFINE_SHAPES
    rows += bench_case(
        "affine", affine_args, lambda b, x, w, bias: b.affine(x, w, bias),
        args.repeats,
    )

    def affine_bwd_args(shape):
        m, k, n = shape
        return (
            rng.standard_normal((m, n)),
            rng.standard_normal((m, k)),
            rng.standard_normal((k, n)),
        )

    affine_bwd_args.shapes = AFFINE_SHAPES
    rows += bench_case(
        "affine_backward", affine_bwd_args,
        lambda b, g, x, w: b.affine_backward(g, x, w), args.repeats,
    )

    def elt_args(shape):
        return (rng.standard_normal(shape),)

    elt_args.shapes = ELTWISE_SHAPES
    for kernel in ("tanh", "sigmoid", "softmax_rows"):
        rows += bench_case(
            kernel, elt_args,
            lambda b, z, kernel=kernel: getattr(b, kernel)(z), args.repeats,
        )

    def adam_args(shape):
        size = int(np.prod(shape))
        return (
            rng.standard_normal(size),
            rng.standard_normal(size),
            np.zeros(size),
            np.zeros(size),
        )

    adam_args.shapes = ELTWISE_SHAPES
    rows += bench_case(
        "adam_update", adam_args,
        lambda b, p, g, m, v: b.adam_update(p, g, m, v, 1e-3, 0.9, 0.999, 1e-8, 1),
        args.repeats,
    )

    header = f"{'kernel':<16} {'shape':<18} {'pure (us)':>10} {'compiled (us)':>14} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    lines = ["kernel,shape,pure_us,compiled_us,speedup"]
    for name, shape, pure_t, comp_t in rows:
        speedup = pure_t / comp_t if comp_t == comp_t and comp_t > 0 else float("nan")
        print(
            f"{name:<16} {str(shape):<18} {pure_t * 1e6:>10.2f} "
            f"{comp_t * 1e6:>14.2f} {speedup:>7.2f}x"
        )
        lines.append(
            f"{name},{'x'.join(map(str, shape))},{pure_t * 1e6:.3f},"
            f"{comp_t * 1e6:.3f},{speedup:.3f}"
        )
    if not HAVE_COMPILED:
        print("\ncompiled kernels not built; pure backend only")
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"\nwrote {args.csv}")


if __name__ == "__main__":
    main()

"""Compare the compiled and numpy mixture kernels.

    python benchmarks/bench_kernels.py [--n 100000] [--dim 2] [--K 2] [--repeats 20]
"""

import argparse
import statistics
import time

import numpy as np

from dlab import kernels


def time_call(fn, repeats):
    fn()  # warm-up
    out = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        out.append((time.perf_counter() - t0) * 1e3)
    return statistics.median(out)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--K", type=int, default=2)
    p.add_argument("--repeats", type=int, default=20)
    args = p.parse_args(argv)

    gen = np.random.default_rng(0)
    x = gen.normal(0, 3, (args.n, args.dim))
    means = gen.normal(0, 2, (args.K, args.dim))
    variances = gen.uniform(0.5, 2.0, (args.K, args.dim))
    weights = np.full(args.K, 1.0 / args.K)
    W = gen.normal(size=(args.K, args.dim))
    b = gen.normal(size=args.K)

    backends = kernels.available_backends()
    print(f"n={args.n} d={args.dim} K={args.K} repeats={args.repeats}; default backend: {kernels.BACKEND}")
    print(f"{'kernel':<22}" + "".join(f"{name + ' ms':>14}" for name in backends) + f"{'speedup':>10}")
    rows = {
        "mixture_eval": lambda be: kernels.mixture_eval(x, means, variances, weights, backend=be),
        "softmax_affine_grad": lambda be: kernels.softmax_affine_grad(x, W, b, 0, backend=be),
    }
    for label, fn in rows.items():
        ms = {be: time_call(lambda: fn(be), args.repeats) for be in backends}
        speed = f"{ms['python'] / ms['cython']:>9.2f}x" if "cython" in ms else f"{'n/a':>10}"
        print(f"{label:<22}" + "".join(f"{ms[be]:>14.3f}" for be in backends) + speed)
    if "cython" in backends:
        a = kernels.mixture_eval(x, means, variances, weights, backend="cython")[2]
        c = kernels.mixture_eval(x, means, variances, weights, backend="python")[2]
        print(f"max |score difference| between backends: {np.max(np.abs(a - c)):.2e}")


if __name__ == "__main__":
    main()

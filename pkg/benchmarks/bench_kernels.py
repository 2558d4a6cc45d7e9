"""Time the compiled kernels against the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--cells N] [--points N] [--k K] [--repeat R]

Each kernel runs on identical inputs for every available backend; results are
checked for exact agreement before timings are reported.
"""
import argparse
import timeit

import numpy as np

from riskalloc._kernels import backends


def make_inputs(cells: int, points: int, k: int, seed: int):
    rng = np.random.default_rng(seed)
    values = rng.normal(50.0, 40.0, cells)
    coef = rng.exponential(1e-6, cells)
    minimum = np.zeros(cells, dtype=np.int64)
    positive = np.abs(values)
    order = np.argsort(positive, kind="stable")
    data = rng.normal(size=(points, 2)) * 5.0
    centroids = data[rng.choice(points, k, replace=False)].copy()
    return {
        "round_greedy": (values, coef, minimum),
        "round_sum_preserving": (positive, order),
        "nearest_centroid": (data, centroids),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--cells", type=int, default=200_000, help="cells for the rounding kernels")
    parser.add_argument("--points", type=int, default=20_000, help="feature vectors for nearest_centroid")
    parser.add_argument("--k", type=int, default=200, help="centroids for nearest_centroid")
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    impls = backends()
    inputs = make_inputs(args.cells, args.points, args.k, args.seed)
    print(f"backends: {', '.join(sorted(impls))}")
    print(f"{'kernel':<22}{'backend':<9}{'best of ' + str(args.repeat):>12}{'speedup':>10}")
    for name, call_args in inputs.items():
        results, times = {}, {}
        for backend, module in sorted(impls.items()):
            fn = getattr(module, name)
            results[backend] = fn(*call_args)
            times[backend] = min(timeit.repeat(lambda: fn(*call_args), number=1, repeat=args.repeat))
        reference = results["python"]
        for backend, out in results.items():
            pairs = zip(out, reference) if isinstance(out, tuple) else [(out, reference)]
            for got, want in pairs:
                np.testing.assert_array_equal(got, want, err_msg=f"{name}: {backend} differs from python")
        for backend in sorted(times):
            speedup = times["python"] / times[backend]
            print(f"{name:<22}{backend:<9}{times[backend]:>11.4f}s{speedup:>9.1f}x")


if __name__ == "__main__":
    main()

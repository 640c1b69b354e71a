"""Compare the compiled and NumPy kernel backends on the Monte-Carlo workload.

    python benchmarks/bench_kernels.py --runs 2000 --iterations 200
"""
import argparse
import time

import numpy as np

from petfisher.kernels import available_backends, get_backend
from petfisher.simulation import paper_scenario, run_rng, sample_counts


def _best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--runs", type=int, default=2000)
    parser.add_argument("--iterations", type=int, default=200)
    parser.add_argument("--sigma", type=float, default=1.0)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    sc = paper_scenario(args.sigma)
    counts = np.array([sample_counts(sc.P, sc.true_lambda, sc.T, run_rng(sc.seed, i)) for i in range(args.runs)])
    init = np.tile(sc.true_lambda * sc.T, (args.runs, 1))
    p = sc.P.p

    results = {}
    for name in available_backends():
        k = get_backend(name)
        batch = _best_of(lambda: k.em_iterate_batch(p, counts, init, args.iterations, 0.0), args.repeat)
        single = _best_of(lambda: k.em_iterate(p, counts[0], init[0], args.iterations, 0.0), args.repeat)
        gram = _best_of(lambda: [k.fisher_gram(p, c) for c in counts[:500]], args.repeat)
        results[name] = (batch, single, gram)

    print(f"{args.runs} runs x {args.iterations} EM iterations, 7 pixels, sigma={args.sigma}")
    print(f"{'backend':<8} {'batch EM [s]':>13} {'one run [ms]':>13} {'500 grams [ms]':>15}")
    for name, (batch, single, gram) in results.items():
        print(f"{name:<8} {batch:>13.4f} {single * 1e3:>13.3f} {gram * 1e3:>15.3f}")
    if len(results) == 2:
        c, py = results["cython"], results["python"]
        print(f"speedup  {py[0] / c[0]:>12.1f}x {py[1] / c[1]:>12.1f}x {py[2] / c[2]:>14.1f}x")

    if len(results) == 2:
        a = get_backend("cython").em_iterate_batch(p, counts, init, args.iterations, 0.0)[0]
        b = get_backend("python").em_iterate_batch(p, counts, init, args.iterations, 0.0)[0]
        print(f"max relative difference between backends: {np.max(np.abs(a - b) / np.abs(b)):.2e}")


if __name__ == "__main__":
    main()

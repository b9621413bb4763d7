"""Times the hot kernels under the numba backend and the pure-numpy fallback.

Run directly for the active backend (controlled by DELAYRECON_NUMBA), or
with --compare to spawn one subprocess per backend and print both columns:

    python benchmarks/bench_backends.py --compare
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _bench(fn, repeat=5, warmup=1):
    for _ in range(warmup):
        fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def run_suite():
    from delayrecon import _accel, dynamics, model
    from delayrecon.embedding import average_mutual_information, cao_curves
    from delayrecon.metrics import KernelSpec, mmd_grad_second, mmd_squared
    from delayrecon.partition import constrained_kmeans

    rng = np.random.default_rng(0)
    results = {"backend": _accel.backend_name()}

    system = dynamics.lorenz63()
    results["simulate_50k_steps"] = _bench(
        lambda: dynamics.simulate(system, (1.0, 1.0, 1.0), 0.01, 0, 50_000))

    results["noise_100k_x3"] = _bench(
        lambda: dynamics.gaussian_noise_matrix(1, 0, 100_000, [0.1, 0.1, 0.1]))

    series = dynamics.simulate(system, (1.0, 1.0, 1.0), 0.01, 1000, 100_000).states[:, 0]
    results["ami_100k_32lags"] = _bench(
        lambda: average_mutual_information(series, 32, 32), repeat=3)

    results["cao_2000pts_d6"] = _bench(
        lambda: cao_curves(series[:30_000], 18, 6, subsample=2000), repeat=3)

    points = rng.normal(size=(2000, 4))
    results["balanced_kmeans_2000x20"] = _bench(
        lambda: constrained_kmeans(points, 20, seed=0), repeat=3)

    xs = rng.normal(size=(100, 3))
    ys = rng.normal(size=(100, 3))
    spec = KernelSpec.energy()
    results["mmd2_100x100"] = _bench(lambda: mmd_squared(spec, xs, ys), repeat=20)
    results["mmd_grad_100x100"] = _bench(lambda: mmd_grad_second(spec, xs, ys), repeat=20)

    from delayrecon.partition import EmpiricalMeasure, MeasurePair
    pairs = [MeasurePair(EmpiricalMeasure(rng.normal(size=(100, 3))),
                         EmpiricalMeasure(rng.normal(size=(100, 4))), k)
             for k in range(20)]
    params = model.init_mlp((4, 100, 100, 100, 100, 3), 0)
    results["measure_grad_step_20cells"] = _bench(
        lambda: model.grad_measure(params, pairs, spec), repeat=10)

    x = rng.normal(size=(2000, 4))
    y = rng.normal(size=(2000, 3))
    results["pointwise_grad_step_2000"] = _bench(
        lambda: model.grad_pointwise(params, x, y), repeat=10)
    return results


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--compare", action="store_true",
                        help="run both backends in subprocesses and tabulate")
    parser.add_argument("--json", action="store_true", help="emit raw JSON")
    args = parser.parse_args()

    if not args.compare:
        results = run_suite()
        if args.json:
            print(json.dumps(results))
            return
        backend = results.pop("backend")
        print(f"backend: {backend}")
        for name, seconds in results.items():
            print(f"  {name:<30} {seconds * 1e3:10.2f} ms")
        return

    columns = {}
    for backend, flag in (("numba", "1"), ("numpy", "0")):
        env = dict(os.environ, DELAYRECON_NUMBA=flag)
        out = subprocess.run([sys.executable, os.path.abspath(__file__), "--json"],
                             env=env, capture_output=True, text=True, check=True)
        columns[backend] = json.loads(out.stdout.strip().splitlines()[-1])
    names = [k for k in columns["numba"] if k != "backend"]
    print(f"{'kernel':<30} {'numba':>12} {'numpy':>12} {'speedup':>9}")
    for name in names:
        a = columns["numba"][name]
        b = columns["numpy"][name]
        print(f"{name:<30} {a * 1e3:10.2f}ms {b * 1e3:10.2f}ms {b / a:8.1f}x")


if __name__ == "__main__":
    main()

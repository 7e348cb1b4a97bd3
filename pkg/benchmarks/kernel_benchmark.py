"""Compare the compiled split kernel against the numpy fallback.

Times the raw sufficient-statistics kernel and a full tree build on a
synthetic dataset at several sizes. Run from the repository root:

    python3 benchmarks/kernel_benchmark.py [--rows 200000] [--json out.json]
"""

import argparse
import json
import statistics
import time

import numpy as np

from lmtdock.tree import backend
from lmtdock.tree.build import BuildConfig, grow, regressor_matrix


def synthetic(rows: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, (rows, 9))
    X[:, 6] = 0.0
    Y = np.column_stack(
        [
            np.tanh(1.5 * X[:, 0] + 0.5 * X[:, 1]),
            np.tanh(X[:, 1] - 0.8 * X[:, 2]),
            0.5 * np.tanh(2.0 * X[:, 7]) + 0.3 * X[:, 3],
            np.tanh(1.2 * X[:, 4] + 0.2),
            0.4 * X[:, 5] + 0.4 * np.tanh(X[:, 8]),
        ]
    )
    return X, Y


def time_kernel(name: str, X, Y, repeats: int) -> float:
    _, kernel = backend.get_kernel(name)
    Z = np.ascontiguousarray(regressor_matrix(X))
    Ys = np.ascontiguousarray(Y)
    n = len(X)
    rng = np.random.default_rng(1)
    order = np.ascontiguousarray(rng.permutation(n), dtype=np.int64)
    bounds = np.unique(np.linspace(n // 20, n, 19, dtype=np.int64))
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        kernel(Z, Ys, order, bounds)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def time_build(name: str, X, Y, repeats: int) -> float:
    cfg = BuildConfig(max_leaves=20, min_samples=50, n_thresholds=20, jitter=0.02,
                      rng_seed=1, ordered_groups=())
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        grow(X, Y, cfg, kernel_name=name)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=200_000)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--json", help="write results to this file")
    args = parser.parse_args()

    names = backend.available_backends()
    if "compiled" not in names:
        print("note: compiled kernel not built (pip install -e . --no-build-isolation)")
    results = []
    for rows in (args.rows // 4, args.rows):
        X, Y = synthetic(rows)
        row = {"rows": rows}
        for name in names:
            row[f"kernel_{name}_s"] = time_kernel(name, X, Y, args.repeats)
            row[f"build_{name}_s"] = time_build(name, X, Y, args.repeats)
        results.append(row)
        line = f"rows={rows:>8d}"
        for name in names:
            line += f"  kernel[{name}]={row[f'kernel_{name}_s']*1e3:8.1f}ms"
            line += f"  build[{name}]={row[f'build_{name}_s']:6.2f}s"
        if len(names) == 2:
            ratio = row["kernel_numpy_s"] / row["kernel_compiled_s"]
            bratio = row["build_numpy_s"] / row["build_compiled_s"]
            line += f"  speedup: kernel {ratio:.2f}x, build {bratio:.2f}x"
        print(line)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"backends": list(names), "results": results}, fh, indent=2)
        print(f"wrote {args.json}")


if __name__ == "__main__":
    main()

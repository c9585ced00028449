"""Compare the compiled and pure-numpy KNN kernels.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]

Times the raw distance and vote kernels on random data, then a full GA
attribute search on the bundled heart-statlog data with each backend
selected through ``KNNGA_PURE_PYTHON`` in a fresh interpreter. Both
backends must produce identical GA results; the script exits non-zero if
they do not.
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from knnga import kernels

GA_SNIPPET = """
import json, time
from knnga import kernels
from knnga.data_model import load_bundled
from knnga.evaluation import make_fitness
from knnga.genetic_search import GaConfig, run_ga
from knnga.knn_core import KnnConfig
d = load_bundled("heart-statlog")
t0 = time.perf_counter()
run = run_ga(GaConfig(seed=1), d.n_features, make_fitness(d, KnnConfig(k=5), 5, 1), cache=False)
print(json.dumps({"backend": kernels.BACKEND, "seconds": time.perf_counter() - t0,
                  "best": str(run.best), "fitness": run.best_fitness}))
"""


def bench_raw(repeat: int) -> None:
    rng = np.random.default_rng(0)
    nq, nt, m = 54, 216, 13
    Q, T = rng.random((nq, m)), rng.random((nt, m))
    T[rng.random(T.shape) < 0.02] = np.nan
    nominal = (rng.random(m) < 0.3).astype(np.uint8)
    fill = np.nanmean(T, axis=0)
    y = rng.integers(0, 2, nt).astype(np.intp)
    print(f"raw kernels, {nq} queries x {nt} training rows x {m} attributes, best of {repeat}")
    print(f"{'backend':<8} {'sq_distances':>14} {'knn_vote k=5':>14}")
    for name, mod in sorted(kernels.available_backends().items()):
        sqd = mod.sq_distances(Q, T, nominal, fill, 0)
        t_d = min(timeit.repeat(lambda: mod.sq_distances(Q, T, nominal, fill, 0), number=50, repeat=repeat)) / 50
        t_v = min(timeit.repeat(lambda: mod.knn_vote(sqd, y, 5, 2, 0), number=50, repeat=repeat)) / 50
        print(f"{name:<8} {t_d * 1e6:>11.1f} us {t_v * 1e6:>11.1f} us")


def bench_ga() -> int:
    rows = []
    for pure in ("0", "1"):
        env = dict(os.environ, KNNGA_PURE_PYTHON=pure)
        out = subprocess.run([sys.executable, "-c", GA_SNIPPET], env=env, capture_output=True, text=True, check=True)
        rows.append(json.loads(out.stdout))
    print("\nGA search on heart-statlog (20 x 20, K=5, 5-fold fitness, cache off)")
    for r in rows:
        print(f"{r['backend']:<8} {r['seconds']:8.3f} s  best {r['best']} fitness {r['fitness']:.4f}")
    if rows[0]["backend"] == rows[1]["backend"]:
        print("compiled backend not built; only the python backend was timed")
        return 0
    same = (rows[0]["best"], rows[0]["fitness"]) == (rows[1]["best"], rows[1]["fitness"])
    print(f"speedup {rows[1]['seconds'] / rows[0]['seconds']:.2f}x, results identical: {same}")
    return 0 if same else 1


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    bench_raw(args.repeat)
    return bench_ga()


if __name__ == "__main__":
    sys.exit(main())

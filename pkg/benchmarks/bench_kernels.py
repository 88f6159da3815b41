"""Time the compiled kernels against the NumPy fallback.

    python benchmarks/bench_kernels.py --sizes 1000 4000 --repeat 3

Each row reports the best wall time per backend and the speedup.  Both backends
are checked to agree before anything is timed.
"""
import argparse
import json
import sys
import time

import numpy as np

from gmtkit import kernels
from gmtkit.generators import atom_cloud
from gmtkit.treecode import build_tree


def best_time(fn, repeat):
    out, best = None, float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def cases(N, seed):
    mu = atom_cloud(N, seed=seed)
    pts, w = mu.points, mu.weights
    vecs = np.random.default_rng(seed).normal(size=pts.shape)
    tree = build_tree(pts, w, 16)
    return {
        "riesz_sum": lambda b: kernels.riesz_sum(pts, pts, w, 1, backend=b),
        "riesz_sum_smooth": lambda b: kernels.riesz_sum(pts, pts, w, 1, 1e-3, True, backend=b),
        "riesz_dot": lambda b: kernels.riesz_dot(pts, pts, w, vecs, 1, backend=b),
        "tree_eval": lambda b: kernels.tree_eval(tree, pts, 0.5, 1, backend=b),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[1000, 2000, 4000])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", help="also write the rows to this file")
    args = ap.parse_args(argv)

    if kernels._compiled is None:
        print("compiled kernels are not built; only the fallback can run", file=sys.stderr)
        return 1
    kernels.set_threads(args.threads)
    rows = []
    print(f"{'kernel':<18}{'N':>8}{'cython s':>12}{'python s':>12}{'speedup':>10}")
    for N in args.sizes:
        for name, fn in cases(N, args.seed).items():
            tc, oc = best_time(lambda: fn("cython"), args.repeat)
            tp, op = best_time(lambda: fn("python"), args.repeat)
            scale = max(float(np.max(np.abs(op))), 1e-300)
            diff = float(np.max(np.abs(oc - op))) / scale
            if diff > 1e-10:
                print(f"{name}: backends disagree (rel diff {diff:.2e})", file=sys.stderr)
                return 1
            rows.append({"kernel": name, "N": N, "cython": tc, "python": tp, "speedup": tp / tc})
            print(f"{name:<18}{N:>8}{tc:>12.4f}{tp:>12.4f}{tp / tc:>10.1f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"threads": args.threads, "rows": rows}, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())

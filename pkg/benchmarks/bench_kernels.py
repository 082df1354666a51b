"""Compare the JIT-compiled tree kernels with the pure-numpy fallback.

The kernels module selects its implementation from the environment
variable CONPREDICT_PURE_NUMPY at import time, so this script re-runs
itself in a subprocess for each mode and prints a timing table.  Both
paths must produce bit-identical forests; the benchmark asserts that
before reporting.

Usage:  python3 benchmarks/bench_kernels.py [--n 2000] [--p 20] [--trees 50]
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import subprocess
import sys
import time


def worker(n: int, p: int, trees: int, repeats: int) -> None:
    import numpy as np

    from conpredict.learning import kernels

    rng = np.random.default_rng(0)
    y = (rng.random(n) < 0.3).astype(np.float64)
    X = rng.normal(size=(n, p))
    X[:, 0] += 2.0 * y
    X = np.ascontiguousarray(X)
    mtry = int(np.ceil(np.sqrt(p)))
    state = np.random.SeedSequence(7).generate_state(1, np.uint64)

    # Warm-up call so JIT compilation is not timed.
    kernels.grow_forest(X[:64], y[:64], 2, 2, mtry, state.copy())

    grow_times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        forest = kernels.grow_forest(X, y, trees, 2, mtry, state.copy())
        grow_times.append(time.perf_counter() - t0)
    feat, thr, left, right, prob, counts, inbag = forest

    pred_times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        proba = kernels.predict_forest(feat, thr, left, right, prob, X)
        pred_times.append(time.perf_counter() - t0)

    digest = hashlib.sha256()
    for arr in (feat, thr, left, right, prob, counts, proba):
        digest.update(np.ascontiguousarray(arr).tobytes())
    print(json.dumps({
        "mode": "pure-numpy" if kernels.PURE_NUMPY else "numba-jit",
        "grow_s": min(grow_times),
        "predict_s": min(pred_times),
        "sha256": digest.hexdigest(),
    }))


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=2000, help="rows")
    ap.add_argument("--p", type=int, default=20, help="features")
    ap.add_argument("--trees", type=int, default=50)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()

    if args.worker:
        worker(args.n, args.p, args.trees, args.repeats)
        return 0

    results = []
    for pure in ("0", "1"):
        env = dict(os.environ, CONPREDICT_PURE_NUMPY=pure)
        proc = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--worker",
             "--n", str(args.n), "--p", str(args.p),
             "--trees", str(args.trees), "--repeats", str(args.repeats)],
            capture_output=True, text=True, env=env,
        )
        if proc.returncode != 0:
            sys.stderr.write(proc.stderr)
            return proc.returncode
        results.append(json.loads(proc.stdout.strip().splitlines()[-1]))

    jit, pure = results
    if jit["sha256"] != pure["sha256"]:
        print("FAIL: the two paths produced different forests", file=sys.stderr)
        return 1

    print(f"forest: n={args.n} p={args.p} trees={args.trees} "
          f"(best of {args.repeats})")
    print(f"{'mode':<12} {'grow (s)':>10} {'predict (s)':>12}")
    for r in results:
        print(f"{r['mode']:<12} {r['grow_s']:>10.4f} {r['predict_s']:>12.4f}")
    print(f"speedup: grow {pure['grow_s'] / jit['grow_s']:.1f}x, "
          f"predict {pure['predict_s'] / jit['predict_s']:.1f}x "
          f"(outputs bit-identical)")
    return 0


if __name__ == "__main__":
    sys.exit(main())

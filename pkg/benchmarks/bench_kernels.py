"""Time the hot kernels under the compiled and pure-numpy backends.

Each backend runs in its own interpreter because the backend is fixed at
import time.  Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from intreg import _accel
from intreg.aggregate import aggregate_columns
from intreg.datagen import gen_design
from intreg.debias import build_precision, default_nodewise_lambda
from intreg.lasso import default_lambda, fit_penalized
from intreg.model import Dataset

repeat = int(sys.argv[1])
rng = np.random.default_rng(0)
X = gen_design(100, 500, seed=0)
beta = np.zeros(500); beta[:10] = 5.0
ds = Dataset(X, X @ beta + 0.05 * rng.standard_normal(100))
V = rng.normal(size=(32, 500)) * 3

def best(fn):
    fn()  # warm-up (and JIT compile)
    times = []
    for _ in range(repeat):
        t = time.perf_counter(); fn(); times.append(time.perf_counter() - t)
    return min(times)

out = {"backend": _accel.BACKEND,
       "lasso n=100 d=500": best(lambda: fit_penalized(ds, "squared", default_lambda(100, 500, 1.0))),
       "nodewise d=500": best(lambda: build_precision(X, default_nodewise_lambda(100, 500))),
       "aggregate m=32 d=500": best(lambda: aggregate_columns(V, np.ones(32), 2.0))}
json.dump(out, sys.stdout)
"""


def run(disable, repeat):
    env = dict(os.environ, INTREG_DISABLE_NUMBA="1" if disable else "0")
    res = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env, check=True,
                         capture_output=True, text=True)
    return json.loads(res.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    fast, slow = run(False, args.repeat), run(True, args.repeat)
    print(f"{'kernel':<24}{fast['backend']:>12}{slow['backend']:>12}{'speedup':>10}")
    for key in fast:
        if key == "backend":
            continue
        print(f"{key:<24}{fast[key] * 1e3:>10.2f}ms{slow[key] * 1e3:>10.2f}ms"
              f"{slow[key] / fast[key]:>9.1f}x")


if __name__ == "__main__":
    main()

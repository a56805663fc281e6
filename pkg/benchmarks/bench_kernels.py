"""Timing comparison of the numba and pure-numpy pooled kernels.

Run directly:  python3 benchmarks/bench_kernels.py [pool_size]

Each backend runs in its own subprocess because the backend is fixed at
import time by the NBPUNCT_NUMBA environment variable.
"""

import json
import os
import subprocess
import sys
import time

WORKER = r"""
import json, sys, time
import numpy as np
from nbpunct import kernels
from nbpunct.gf import field_new

pool_size = int(sys.argv[1])
f = field_new(4)
rng = np.random.default_rng(0)
pool = rng.random((pool_size, f.q)) + 1e-3
pool /= pool.sum(axis=1, keepdims=True)
degrees = rng.integers(5, 7, size=pool_size)
choices = rng.integers(0, pool_size, size=(pool_size, 5))
labels = rng.integers(1, f.q, size=(pool_size, 5))
out_labels = rng.integers(1, f.q, size=pool_size)
priors = pool.copy()
sdeg = rng.integers(2, 11, size=pool_size)
schoices = rng.integers(0, pool_size, size=(pool_size, 9))

# warm up (jit compilation for the numba path)
kernels.check_pool_update(pool, degrees, choices, labels, out_labels, f)
kernels.symbol_pool_update(priors, pool, sdeg, schoices)

reps = 5
t0 = time.perf_counter()
for _ in range(reps):
    out = kernels.check_pool_update(pool, degrees, choices, labels,
                                    out_labels, f)
t_check = (time.perf_counter() - t0) / reps
t0 = time.perf_counter()
for _ in range(reps):
    kernels.symbol_pool_update(priors, out, sdeg, schoices)
t_sym = (time.perf_counter() - t0) / reps
print(json.dumps({"backend": kernels.backend(), "check_s": t_check,
                  "symbol_s": t_sym, "checksum": float(out.sum())}))
"""


def run(backend_flag, pool_size):
    env = dict(os.environ, NBPUNCT_NUMBA=backend_flag)
    out = subprocess.run([sys.executable, "-c", WORKER, str(pool_size)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    pool_size = int(sys.argv[1]) if len(sys.argv) > 1 else 10000
    results = [run(flag, pool_size) for flag in ("1", "0")]
    print(f"pool size {pool_size}, F16, check degrees 5-6, "
          f"symbol degrees 2-10")
    for r in results:
        print(f"  {r['backend']:>5}: check {1e3 * r['check_s']:8.2f} ms   "
              f"symbol {1e3 * r['symbol_s']:8.2f} ms")
    if results[0]["backend"] == results[1]["backend"]:
        print("numba unavailable; both runs used numpy")
    else:
        assert abs(results[0]["checksum"] - results[1]["checksum"]) < 1e-6
        speed = results[1]["check_s"] / results[0]["check_s"]
        print(f"  check-node speedup numba/numpy: {speed:.1f}x")


if __name__ == "__main__":
    main()

"""Time the compiled and numpy quadrature backends on the same workload.

    python benchmarks/bench_backends.py [--n 2000] [--repeat 3]
"""
import argparse
import time

import numpy as np

from gykit import _backend, _quad_py
from gykit.kernels import DEFAULT_QUAD as CFG


def bench(fn, z, t, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(z, t, CFG.abs_tol, CFG.rel_tol, CFG.max_subdivisions, CFG.tail_cutoff)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _backend.BACKEND != "cython":
        raise SystemExit("compiled backend not built; run `pip install -e . --no-build-isolation`")
    z = np.geomspace(1e-3, 50.0, args.n)
    print(f"{'t':>6} {'python [s]':>11} {'cython [s]':>11} {'speedup':>8} {'max |diff|/tol':>15}")
    for t in (0.3, 1.0, 3.0):
        tp, ref = bench(_quad_py.scaled_integral_batch, z, t, args.repeat)
        tc, got = bench(_backend.scaled_integral_batch, z, t, args.repeat)
        # same tolerance as the unit test: both error estimates plus the summation floor
        tol = ref[1] + got[1] + 4 * np.finfo(float).eps * ref[2]
        agree = float(np.max(np.abs(got[0] - ref[0]) / tol))
        print(f"{t:6.2f} {tp:11.4f} {tc:11.4f} {tp / tc:8.1f} {agree:15.3g}")


if __name__ == "__main__":
    main()

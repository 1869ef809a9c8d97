"""Compare the numba and numpy sweep backends.

    python benchmarks/bench_sweep.py            # kernel timings + agreement
    python benchmarks/bench_sweep.py --solve    # also a full fixed-point solve per backend

The full solve runs in a subprocess per backend so that ASYMPODE_NO_NUMBA
takes effect at import time.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from asympode import _accel

SOLVE = """
import time
from asympode.poincare import PoincareProblem, riccati_reduction
from asympode.solver import solve_fixed_point
from asympode import _accel
p = PoincareProblem((24, 50, 35, 10), ("3/((cos(t)+2)*log(t))", 0, 0, 0), t0=10)
red = riccati_reduction(p, -1.0)
solve_fixed_point(red.table, red.roots, 10.0, t_max=60, raise_on_failure=False)  # warm-up
t = time.perf_counter()
z, d = solve_fixed_point(red.table, red.roots, 10.0, t_max=1000, raise_on_failure=False)
print(f"{_accel.backend():6s} full solve T=1000: {time.perf_counter() - t:7.3f} s, "
      f"{d.iterations} iterations, z(end)={z.z[-1]:.12e}")
"""


def bench_kernels(sizes, repeat):
    if _accel.backend() != "numba":
        print("numba backend disabled; only numpy timings")
    rng = np.random.default_rng(0)
    print(f"{'n':>8} {'numpy [ms]':>12} {'numba [ms]':>12} {'speedup':>8} {'max rel diff':>13}")
    for n in sizes:
        t = np.linspace(0.0, n / 40.0, n)
        f = rng.standard_normal(n)
        for rate, direction in ((-1.3, 1), (2.1, -1)):
            init = 0.0 if direction > 0 else f[-1] / rate
            a = _accel.exp_sweep(t, f, rate, direction, init, use="numpy")
            tn = min(timeit.repeat(lambda: _accel.exp_sweep(t, f, rate, direction, init, use="numpy"),
                                   number=1, repeat=repeat))
            if _accel.backend() == "numba":
                b = _accel.exp_sweep(t, f, rate, direction, init, use="numba")
                tj = min(timeit.repeat(lambda: _accel.exp_sweep(t, f, rate, direction, init, use="numba"),
                                       number=1, repeat=repeat))
                diff = float(np.max(np.abs(a - b)) / max(np.max(np.abs(a)), 1e-300))
                print(f"{n:8d} {tn * 1e3:12.3f} {tj * 1e3:12.3f} {tn / tj:8.1f} {diff:13.2e}")
            else:
                print(f"{n:8d} {tn * 1e3:12.3f} {'-':>12} {'-':>8} {'-':>13}")


def bench_solve():
    sys.stdout.flush()
    for flag in ("0", "1"):
        env = dict(os.environ, ASYMPODE_NO_NUMBA=flag)
        subprocess.run([sys.executable, "-c", SOLVE], env=env, check=True)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[1_000, 10_000, 40_000, 160_000])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--solve", action="store_true")
    args = ap.parse_args()
    bench_kernels(args.sizes, args.repeat)
    if args.solve:
        bench_solve()


if __name__ == "__main__":
    main()

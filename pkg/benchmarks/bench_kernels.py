"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints the best wall time per kernel and backend, the speedup, and whether
the two backends agree bit for bit.
"""
import argparse
import time

import numpy as np

from flowobs import kernels
from flowobs.battery import BatteryParams

P = BatteryParams()
F_MIN = P.constants.faraday_per_minute


def plant_case(mod, n=20000):
    t = np.arange(n + 1) * 0.01
    cur = np.zeros(2 * n + 1)
    flow = np.full(2 * n + 1, 9e-3)
    x0 = np.array([1.0, 1.0, 5.6142e-9, 0.0, 0.0])
    return mod.plant_rk4(t, cur, flow, x0, kernels.KIND_PARAMETRIC, 0.0, P.c0, P.v_res,
                         P.v_cell, P.epsilon, F_MIN, np.array([0.5, 0.025]))[0]


def observer_case(mod, n=2000):
    ts = np.arange(n) * 0.1
    ys = 0.99 - 1e-5 * ts
    gain = np.array([0.36, 6.7, -46.9, -5.96, -5.15])
    return mod.observer_rk4(ts, ys, np.zeros(n), np.full(n, 9e-3),
                            np.array([0.87, 0.85, 0.0, 0.0, 0.0]), 0.01, P.c0, P.v_res,
                            P.v_cell, P.epsilon, F_MIN, np.array([0.5, 0.025]), 1e-4,
                            gain)[0]


def jacobi_case(mod, n=12, reps=50):
    rng = np.random.default_rng(0)
    out = None
    for _ in range(reps):
        a = rng.standard_normal((n, n))
        out = mod.jacobi_eigh(a + a.T)[0]
    return out


CASES = {"plant_rk4 (20k steps)": plant_case,
         "observer_rk4 (2k samples x 10 substeps)": observer_case,
         "jacobi_eigh (50 x 12x12)": jacobi_case}


def best_time(fn, mod, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(mod)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    mods = kernels.backends()
    if "cython" not in mods:
        print("compiled backend not built; only the Python fallback is available")
    print(f"{'kernel':42s} {'python [s]':>11s} {'cython [s]':>11s} {'speedup':>8s} {'bitwise':>8s}")
    for name, fn in CASES.items():
        tp, op = best_time(fn, mods["python"], args.repeat)
        if "cython" in mods:
            tc, oc = best_time(fn, mods["cython"], args.repeat)
            same = np.array_equal(op, oc)
            print(f"{name:42s} {tp:11.4f} {tc:11.4f} {tp / tc:8.1f} {str(same):>8s}")
        else:
            print(f"{name:42s} {tp:11.4f} {'-':>11s}")


if __name__ == "__main__":
    main()

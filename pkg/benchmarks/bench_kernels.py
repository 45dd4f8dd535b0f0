"""Compiled vs pure-Python RK4 kernels.

    python3 benchmarks/bench_kernels.py [--steps N] [--repeat R]

Times one scalar prediction (``advance``) and one 31-candidate grid
(``advance_batch``) with each backend, checks the results are bitwise
identical, and prints the per-step cost and the speedup. Also times one
controller step (grid plus golden-section refinement) with the active backend.
"""
import argparse
import time

import numpy as np

from toppmpc import _pykernel
from toppmpc.model import MINUTES_PER_DAY, NOMINAL_STATE, ModelParams
from toppmpc.mpc import MpcConfig, solve_step

try:
    from toppmpc import _kernel
except ImportError:
    _kernel = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=4000,
                    help="RK4 steps per run (a 40-day window is 80000)")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    p = ModelParams().as_array()
    x0 = NOMINAL_STATE.as_array()
    us = np.linspace(0.0, 3.0, 31)
    h, n = 5e-4, args.steps

    def scalar(mod):
        def run():
            x = x0.copy()
            r = mod.advance(x, 1.5, n, h, p, MINUTES_PER_DAY)
            return x, np.array(r, dtype=float)
        return run

    def batch(mod):
        return lambda: mod.advance_batch(x0, us, n, h, p, MINUTES_PER_DAY)

    print(f"{'kernel':<22}{'backend':<10}{'total [s]':>12}{'ns/step':>12}{'speedup':>10}")
    rows = [("advance (1 input)", scalar, 1), ("advance_batch (31)", batch, len(us))]
    for name, make, lanes in rows:
        t_py, r_py = best_of(make(_pykernel), args.repeat)
        print(f"{name:<22}{'python':<10}{t_py:>12.4f}{1e9 * t_py / (n * lanes):>12.1f}"
              f"{'1.0':>10}")
        if _kernel is None:
            print(f"{name:<22}{'compiled':<10}{'not built':>12}")
            continue
        t_c, r_c = best_of(make(_kernel), args.repeat)
        same = all(a.tobytes() == b.tobytes() for a, b in zip(r_c, r_py))
        print(f"{name:<22}{'compiled':<10}{t_c:>12.4f}{1e9 * t_c / (n * lanes):>12.1f}"
              f"{t_py / t_c:>10.1f}   bitwise equal: {same}")

    t, res = best_of(lambda: solve_step(NOMINAL_STATE, MpcConfig(), ModelParams()), 1)
    print(f"\none controller step at the nominal start: {t:.3f} s "
          f"({res.evaluations} window predictions, u* = {res.u:.4f})")


if __name__ == "__main__":
    main()

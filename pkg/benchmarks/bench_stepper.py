"""Crank-Nicolson stepper: numba kernels against the numpy/scipy fallback.

    python benchmarks/bench_stepper.py [--steps 2000] [--sizes 401,1601,6401]

Both paths advance the same harmonic ground state on a synthetic reduced
system (quadratic well with a quartic drop) and the table reports the time
per step, the speed-up and the largest difference between the final states.
The numba timing excludes compilation (one warm-up call is made first).
"""
import argparse
import time

import numpy as np

from vacuumpath._jit import HAVE_NUMBA
from vacuumpath.evolver import cn_bands, false_vacuum_weights, harmonic_state
from vacuumpath.kernels import BandedStepper
from vacuumpath.reduction import ReducedSystem


def toy_system(n, half_width=4.0):
    R = np.linspace(-half_width, half_width, n)
    K = 1.0 + 0.5 * R**2
    U = 8.0 * R**2 - 2.5 * R**4
    R_top = np.sqrt(8.0 / 5.0)
    return ReducedSystem(R, K, U, 1.0, 16.0, R_top, 8.0 * R_top**2 - 2.5 * R_top**4, 2)


def time_run(rs, use_numba, steps, dt=1e-4, gamma=1e-6):
    lhs, rhs = cn_bands(rs, dt, gamma)
    st = BandedStepper(lhs, rhs, 2, 2, use_numba=use_numba)
    psi = harmonic_state(rs, 0).amplitudes[1:-1]
    w = false_vacuum_weights(rs)[1:-1]
    if use_numba:
        st.run(psi, 2, 1, w)
    t = time.perf_counter()
    final, pf, _ = st.run(psi, steps, 10, w)
    return time.perf_counter() - t, final, pf


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--sizes", default="401,1601,6401")
    args = ap.parse_args()
    if not HAVE_NUMBA:
        print("numba is not installed; only the fallback can be timed")
    print(f"{'points':>8} {'numpy us/step':>14} {'numba us/step':>14} {'speed-up':>9} {'max |diff|':>11}")
    for n in (int(s) for s in args.sizes.split(",")):
        rs = toy_system(n)
        t_np, f_np, _ = time_run(rs, False, args.steps)
        if HAVE_NUMBA:
            t_nb, f_nb, _ = time_run(rs, True, args.steps)
            diff = float(np.max(np.abs(f_np - f_nb)))
            print(f"{n:8d} {1e6 * t_np / args.steps:14.2f} {1e6 * t_nb / args.steps:14.2f} "
                  f"{t_np / t_nb:9.1f} {diff:11.2e}")
        else:
            print(f"{n:8d} {1e6 * t_np / args.steps:14.2f} {'-':>14} {'-':>9} {'-':>11}")


if __name__ == "__main__":
    main()

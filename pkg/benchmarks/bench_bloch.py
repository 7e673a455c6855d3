"""Time the numba and numpy Bloch integrators on the same azimuth-fit batch.

Usage: python benchmarks/bench_bloch.py [--n 3600] [--repeat 3]
"""

import argparse
import time

import numpy as np

from spinloc import _accel
from spinloc.blochsim import ProtocolTiming, simulate_phi_n0_batch
from spinloc.lattice import cartesian_of


def batch(n):
    phis = np.linspace(0, 2 * np.pi, n, endpoint=False)
    rfs = np.radians(np.array([0.0, 90.0, 180.0, 270.0]))[np.arange(n) % 4]
    return phis, rfs


def run(backend, n, timing, e_rf):
    phis, rfs = batch(n)
    t = time.perf_counter()
    out = simulate_phi_n0_batch(phis, rfs, 215.7908, timing, np.radians(5.94), np.radians(94.8), e_rf, 215.6,
                                backend=backend, return_vectors=True)
    return time.perf_counter() - t, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=3600, help="trajectories per batch")
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args()
    timing = ProtocolTiming.from_rf(215.6)
    e_rf = cartesian_of(1.0, np.radians(55.7), np.radians(186.2))
    results = {}
    backends = ["numpy"] + (["numba"] if _accel.HAS_NUMBA else [])
    for b in backends:
        run(b, 8, timing, e_rf)  # warm-up / JIT compile
        times = []
        for _ in range(a.repeat):
            dt, out = run(b, a.n, timing, e_rf)
            times.append(dt)
        results[b] = out
        print(f"{b:6s} best {min(times):.3f} s over {a.repeat} runs ({a.n} trajectories)")
    if len(results) == 2:
        diff = np.max(np.abs(results["numba"] - results["numpy"]))
        print(f"max |numba - numpy| = {diff:.3e}")


if __name__ == "__main__":
    main()

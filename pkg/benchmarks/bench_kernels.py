"""Compare the compiled and pure-Python RK4 kernels on a correlation sector.

The operator is the charge -1 block of the Liouvillian for a 2x2 array at
Fock cutoff 2, the block that dominates emission-spectrum runtime.

    python3 benchmarks/bench_kernels.py [--steps 2000] [--repeat 5]
"""

import argparse
import time

import numpy as np

from tchm import kernels
from tchm.lindblad import build_liouvillian, default_time_step
from tchm.model import TWO_PI, SystemParams, sample_disorder


def sector_problem(n, m, cutoff, columns):
    p = SystemParams.standard(n, m, j_over_g=0.1, delta_over_g_sqrt_m=0.25)
    lv = build_liouvillian(sample_disorder(p, 7), 0, TWO_PI * 0.01, fock_cutoff=cutoff)
    _, block = lv.sector(-1)
    rng = np.random.default_rng(0)
    shape = (block.shape[0], columns)
    b0 = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    w = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    return block, b0 / np.linalg.norm(b0), w, default_time_step(p)


def best_time(backend, block, b0, w, dt, steps, repeat):
    times, out = [], None
    for _ in range(repeat):
        b = b0.copy()
        t0 = time.perf_counter()
        out = kernels.rk4_propagate(block, b, w, dt, steps, 10, backend=backend)
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled kernels not built; run: python3 setup.py build_ext --inplace")
    print(f"{'system':<16}{'nnz':>8}{'cols':>6}" + "".join(f"{b:>12}" for b in backends)
          + ("     speedup  max rel diff" if len(backends) > 1 else ""))
    for n, m, cutoff, cols in [(1, 1, 2, 1), (2, 1, 2, 2), (2, 2, 2, 1), (2, 2, 2, 4)]:
        block, b0, w, dt = sector_problem(n, m, cutoff, cols)
        res = {b: best_time(b, block, b0, w, dt, args.steps, args.repeat) for b in backends}
        line = f"{f'N={n} M={m} c={cutoff}':<16}{block.nnz:>8}{cols:>6}"
        line += "".join(f"{res[b][0] * 1e3:>10.1f}ms" for b in backends)
        if len(backends) > 1:
            (tp, op), (tc, oc) = res["python"], res["cython"]
            diff = np.abs(op - oc).max() / np.abs(op).max()
            line += f"{tp / tc:>11.2f}x{diff:>14.1e}"
        print(line)


if __name__ == "__main__":
    main()

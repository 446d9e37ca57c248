"""Compare the numba kernels with their numpy counterparts.

    python benchmarks/bench_kernels.py [--repeat 20]

Prints the best wall time per call for the Riemann assembly and the grid
residual, plus the max difference between the two paths.  With
KAHLERQCH_DISABLE_JIT=1 only the numpy timings are reported.
"""

import argparse
import time

import numpy as np

from kahlerqch import _kernels


def best_of(fn, repeat):
    fn()  # warm-up (includes compilation for the jit path)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def riemann_case(n, rng):
    gamma = rng.standard_normal((n, 4, 4, 4))
    gamma = gamma - gamma.transpose(0, 2, 1, 3)  # antisymmetric in (f, b) like a metric connection
    dgamma = rng.standard_normal((n, 4, 4, 4, 4))
    struct = rng.standard_normal((n, 4, 4, 4))
    return gamma, dgamma, struct


def liouville_case(n, rng):
    u = rng.standard_normal((n, n)) * 0.1
    h2 = 1.0 + rng.random((n, n))
    return u, h2, 2.0, -4.0, 1.0 / (n - 1), 1.0 / (n - 1)


def run(repeat):
    rng = np.random.default_rng(0)
    rows = []
    for n in (100, 1000, 10000):
        args = riemann_case(n, rng)
        t_np = best_of(lambda: _kernels.riemann(*args, jit=False), repeat)
        row = [f"riemann    n={n:<6d}", t_np]
        if _kernels.use_jit():
            t_jit = best_of(lambda: _kernels.riemann(*args, jit=True), repeat)
            diff = np.max(np.abs(_kernels.riemann(*args, jit=True) - _kernels.riemann(*args, jit=False)))
            row += [t_jit, diff]
        rows.append(row)
    for n in (65, 257, 513):
        args = liouville_case(n, rng)
        t_np = best_of(lambda: _kernels.liouville_residual(*args, jit=False), repeat)
        row = [f"liouville  N={n:<6d}", t_np]
        if _kernels.use_jit():
            t_jit = best_of(lambda: _kernels.liouville_residual(*args, jit=True), repeat)
            diff = np.max(np.abs(_kernels.liouville_residual(*args, jit=True)
                                 - _kernels.liouville_residual(*args, jit=False)))
            row += [t_jit, diff]
        rows.append(row)
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    jit = _kernels.use_jit()
    print(f"numba jit: {'on' if jit else 'off'}")
    header = f"{'kernel':22s} {'numpy [ms]':>11s}"
    if jit:
        header += f" {'jit [ms]':>10s} {'speedup':>8s} {'max diff':>10s}"
    print(header)
    for row in run(args.repeat):
        line = f"{row[0]:22s} {row[1] * 1e3:11.3f}"
        if jit:
            line += f" {row[2] * 1e3:10.3f} {row[1] / row[2]:8.2f} {row[3]:10.2e}"
        print(line)


if __name__ == "__main__":
    main()

"""Timing comparison of the numba kernels against the numpy fallback.

Exercises the two hot paths of the integrator: the explicit diffusion
stencil and the implicit conjugate-gradient solve. Typical output::

    size     kernel        numpy        numba     speedup
    256x256  diffusion   180.1 us      95.3 us       1.9x
    256x256  cg solve      4.21 ms      1.37 ms      3.1x

Run as ``python3 benchmarks/bench_kernels.py``; pass --sizes to change
the grid edge lengths.
"""

import argparse
import time

import numpy as np

from sirblab.kernels import (
    HAS_NUMBA,
    cg_solve_numpy,
    diffusion_apply_numpy,
)

if HAS_NUMBA:
    from sirblab.kernels import cg_solve_numba, diffusion_apply_numba


def median_time(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def fmt(seconds):
    if seconds < 1e-3:
        return f"{seconds * 1e6:8.1f} us"
    if seconds < 1.0:
        return f"{seconds * 1e3:8.2f} ms"
    return f"{seconds:8.3f} s "


def bench_case(n, dt, rtol, repeats):
    rng = np.random.default_rng(0)
    u = rng.uniform(0.5, 1.5, size=(n, n))
    a = rng.uniform(0.01, 0.1, size=(n, n))
    hx = hy = 1.0 / n

    rows = []
    t_np = median_time(lambda: diffusion_apply_numpy(u, a, hx, hy), repeats)
    if HAS_NUMBA:
        diffusion_apply_numba(u, a, hx, hy)  # compile outside the clock
        t_nb = median_time(lambda: diffusion_apply_numba(u, a, hx, hy), repeats)
    else:
        t_nb = None
    rows.append(("diffusion", t_np, t_nb))

    maxiter = 10 * n * n
    t_np = median_time(lambda: cg_solve_numpy(u, a, dt, hx, hy, rtol, maxiter),
                       repeats)
    if HAS_NUMBA:
        cg_solve_numba(u, a, dt, hx, hy, rtol, maxiter)
        t_nb = median_time(lambda: cg_solve_numba(u, a, dt, hx, hy, rtol, maxiter),
                           repeats)
        x_np = cg_solve_numpy(u, a, dt, hx, hy, rtol, maxiter)[0]
        x_nb = cg_solve_numba(u, a, dt, hx, hy, rtol, maxiter)[0]
        agree = float(np.max(np.abs(x_np - x_nb)))
        assert agree < 1e-10, f"backends disagree by {agree}"
    else:
        t_nb = None
    rows.append(("cg solve", t_np, t_nb))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument("--dt", type=float, default=0.01)
    ap.add_argument("--rtol", type=float, default=1e-13)
    args = ap.parse_args()

    if not HAS_NUMBA:
        print("numba not importable; timing the numpy path only")

    print(f"{'size':9s} {'kernel':10s} {'numpy':>12s} {'numba':>12s} {'speedup':>9s}")
    for n in args.sizes:
        size = f"{n}x{n}"
        for name, t_np, t_nb in bench_case(n, args.dt, args.rtol, args.repeats):
            if t_nb is None:
                print(f"{size:9s} {name:10s} {fmt(t_np):>12s} {'-':>12s} {'-':>9s}")
            else:
                print(f"{size:9s} {name:10s} {fmt(t_np):>12s} {fmt(t_nb):>12s}"
                      f" {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()

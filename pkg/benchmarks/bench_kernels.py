"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--n 4000] [--repeat 5]

Both backends are imported directly, so the PDMHO_DISABLE_NUMBA flag does not
matter here. The first numba call (compilation, or loading the on-disk cache)
is excluded from the timings.
"""

import argparse
import time

import numpy as np

from pdmho import _kernels_numba as nb
from pdmho import _kernels_numpy as npk


def oscillator_tridiagonal(n, half_width=20.0):
    x = np.linspace(-half_width, half_width, n)
    h = x[1] - x[0]
    d = 1.0 / h**2 + 0.5 * x * x
    e = np.full(n - 1, -0.5 / h**2)
    return d, e


def banded(n, band, rng):
    data = rng.standard_normal((2 * band + 1, n))
    for k in range(1, band + 1):
        data[band + k, n - k:] = 0.0
        data[band - k, :k] = 0.0
    return data


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=4000)
    ap.add_argument("--ql-n", type=int, default=400, help="size for the full QL eigendecomposition")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    n = args.n

    d, e = oscillator_tridiagonal(n)
    a1, a2 = banded(n, 1, rng), banded(n, 2, rng)
    v = rng.standard_normal(n)
    dq, eq = oscillator_tridiagonal(args.ql_n)
    lam = 0.5

    def ql(mod):
        dd, ee = dq.copy(), np.zeros(args.ql_n)
        ee[:-1] = eq
        mod.ql_implicit(dd, ee, np.eye(args.ql_n), True, 60)

    cases = [
        ("banded_matvec band 2", lambda m: m.banded_matvec(a2, 2, v)),
        ("banded_matmul 1x2", lambda m: m.banded_matmul(a1, 1, a2, 2)),
        ("bisect_lowest k=6", lambda m: m.bisect_lowest(d, e, 6, -10.0, 5e4, 200)),
        ("inverse_iteration x3", lambda m: m.inverse_iteration(d, e, lam, v, 3)),
        (f"ql_implicit n={args.ql_n}", ql),
    ]
    print(f"{'kernel':28s} {'numba [ms]':>12s} {'numpy [ms]':>12s} {'speed-up':>9s}")
    for name, fn in cases:
        fn(nb)  # compile or load from cache
        t_nb = best_of(lambda: fn(nb), args.repeat)
        t_np = best_of(lambda: fn(npk), args.repeat)
        print(f"{name:28s} {1e3 * t_nb:12.3f} {1e3 * t_np:12.3f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()

"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--k 400] [--n 2000] [--repeat 5]

Compilation is triggered once before timing.  Both paths are called
directly, so RITZBOUND_DISABLE_JIT does not matter here.
"""
import argparse
import timeit

import numpy as np

from ritzbound import kernels
from ritzbound.linalg_core import make_rng, sym_with_spectrum


def amplification_inputs(k, rng):
    theta = np.sort(rng.uniform(1.0, 10.0 * k, k))
    r = 10.0 ** rng.uniform(-12, -2, k)
    gaps = np.abs(theta[:, None] - theta[None, :]) - r[:, None]
    np.fill_diagonal(gaps, np.nan)
    mirror = np.abs(theta[:, None] + theta[None, :]) - r[:, None]
    delta = np.full(k, 5.0)
    return delta, r**2, gaps, mirror


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k", type=int, default=400, help="Ritz values for the amplification kernel")
    ap.add_argument("--n", type=int, default=1000, help="matrix order for Lanczos and Gershgorin")
    ap.add_argument("--steps", type=int, default=200, help="Lanczos steps")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if kernels.numba is None:
        raise SystemExit("numba is not installed; nothing to compare")

    rng = make_rng(args.seed)
    delta, w, gaps, mirror = amplification_inputs(args.k, rng)
    A = sym_with_spectrum(np.arange(1.0, args.n + 1), rng)
    v0 = rng.standard_normal(args.n)
    v0 /= np.linalg.norm(v0)
    tol = 1e-14 * args.n

    cases = {
        f"amplification k={args.k}": (
            lambda: kernels.amplification_numba(delta, w, gaps, mirror, True),
            lambda: kernels.amplification_numpy(delta, w, gaps, mirror, True),
        ),
        f"lanczos n={args.n} steps={args.steps}": (
            lambda: kernels.lanczos_numba(A, v0, args.steps, tol),
            lambda: kernels.lanczos_numpy(A, v0, args.steps, tol),
        ),
        f"gershgorin n={args.n}": (
            lambda: kernels.gershgorin_numba(A),
            lambda: kernels.gershgorin_numpy(A),
        ),
    }

    print(f"{'kernel':<34}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for name, (jit_fn, np_fn) in cases.items():
        jit_fn()  # compile
        t_jit = best(jit_fn, args.repeat)
        t_np = best(np_fn, args.repeat)
        print(f"{name:<34}{t_jit:>12.5f}{t_np:>12.5f}{t_np / t_jit:>9.1f}x")

    d1 = kernels.amplification_numba(delta, w, gaps, mirror, True)
    d2 = kernels.amplification_numpy(delta, w, gaps, mirror, True)
    ok = np.isnan(d1) == np.isnan(d2)
    print(f"amplification paths agree: {bool(ok.all() and np.allclose(d1[~np.isnan(d1)], d2[~np.isnan(d2)], rtol=1e-14))}")


if __name__ == "__main__":
    main()

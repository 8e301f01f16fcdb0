"""Time the numba kernels against the pure-numpy fallback.

Run with ``python benchmarks/bench_kernels.py``.  Both backends are checked
for agreement before timing; the first numba call (compilation) is excluded.
"""
import argparse
import time

import numpy as np

from singular_spade import kernels


def _best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_di_statistics(reps, photons, repeats):
    rng = np.random.default_rng(0)
    z = rng.standard_normal((reps, photons))
    u = rng.random((reps, photons))
    t = np.arange(0.01, 0.41, 0.01)
    cp = [photons // 4, photons // 2, photons]
    ref = kernels.di_statistics(z, u, t, 0.3, cp, backend="numpy")
    got = kernels.di_statistics(z, u, t, 0.3, cp, backend="numba")
    assert all(np.allclose(a, b, rtol=1e-10, atol=1e-10) for a, b in zip(ref, got))
    return {
        backend: _best_of(lambda: kernels.di_statistics(z, u, t, 0.3, cp, backend=backend), repeats)
        for backend in ("numpy", "numba")
    }


def bench_mixture_loglik_grid(photons, nodes, repeats):
    rng = np.random.default_rng(1)
    z = rng.standard_normal(photons)
    t = np.linspace(0.0, 0.5, nodes)
    e = np.linspace(0.0, 0.3, nodes)
    cp = [photons // 8, photons // 2, photons]
    ref = kernels.mixture_loglik_grid(z, t, e, cp, backend="numpy")
    got = kernels.mixture_loglik_grid(z, t, e, cp, backend="numba")
    assert np.allclose(ref, got, rtol=1e-10, atol=1e-10)
    return {
        backend: _best_of(lambda: kernels.mixture_loglik_grid(z, t, e, cp, backend=backend), repeats)
        for backend in ("numpy", "numba")
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--reps", type=int, default=512)
    parser.add_argument("--photons", type=int, default=2000)
    parser.add_argument("--nodes", type=int, default=32)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()
    if not kernels.USE_NUMBA:
        parser.error("numba is disabled (unset SINGULAR_SPADE_NO_NUMBA)")
    results = {
        f"di_statistics ({args.reps} x {args.photons}, 40 separations)": bench_di_statistics(
            args.reps, args.photons, args.repeats
        ),
        f"mixture_loglik_grid ({args.photons} photons, {args.nodes}^2 nodes)": bench_mixture_loglik_grid(
            args.photons, args.nodes, args.repeats
        ),
    }
    for name, t in results.items():
        print(f"{name}: numpy {t['numpy']:.3f} s, numba {t['numba']:.3f} s, speed-up {t['numpy'] / t['numba']:.1f}x")


if __name__ == "__main__":
    main()

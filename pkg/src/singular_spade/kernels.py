"""Hot numeric kernels, each in a numba and a pure-numpy flavour.

Both kernels evaluate sums of the per-photon log-likelihood ratio of the
two-source mixture against the single source,

    log((1 - eps) + eps * exp(t * z - t**2 / 2)),

where ``z`` is a position in PSF-width units and ``t = s / sigma``.  The
numba versions multiply the affine factors in blocks of ``_BLOCK`` photons and
take one logarithm per block, which is where nearly all of the speed-up comes
from.  Blocks whose product leaves ``(_TINY, _HUGE)`` fall back to per-photon
logarithms, so the result never depends on the data staying well scaled.

The public names (``mixture_loglik_grid``, ``di_statistics``) are bound to
the numba implementation unless ``SINGULAR_SPADE_NO_NUMBA`` is set.
"""
import math

import numpy as np

from ._jit import USE_NUMBA, njit, prange

_BLOCK = 16
_TINY = 1e-280
_HUGE = 1e280


@njit(cache=True)
def _sum_log_affine(om, c, dc, flags, r, start, stop):
    # sum over [start, stop) of log(om + (c + dc * flags[i]) * r[i])
    total = 0.0
    i = start
    while i + _BLOCK <= stop:
        p = 1.0
        for k in range(i, i + _BLOCK):
            p *= om + (c + dc * flags[k]) * r[k]
        if p > _TINY and p < _HUGE:
            total += math.log(p)
        else:
            for k in range(i, i + _BLOCK):
                total += math.log(om + (c + dc * flags[k]) * r[k])
        i += _BLOCK
    for k in range(i, stop):
        total += math.log(om + (c + dc * flags[k]) * r[k])
    return total


@njit(cache=True)
def _mixture_loglik_grid_numba(z, t_nodes, eps_nodes, checkpoints):
    n_cp = checkpoints.size
    n_t = t_nodes.size
    n_e = eps_nodes.size
    out = np.zeros((n_cp, n_t, n_e))
    n = checkpoints[n_cp - 1] if n_cp > 0 else 0
    r = np.empty(n)
    flags = np.zeros(n)
    for j in range(n_t):
        t = t_nodes[j]
        for i in range(n):
            r[i] = math.exp(t * z[i] - 0.5 * t * t)
        for k in range(n_e):
            eps = eps_nodes[k]
            acc = 0.0
            start = 0
            for c in range(n_cp):
                stop = checkpoints[c]
                acc += _sum_log_affine(1.0 - eps, eps, 0.0, flags, r, start, stop)
                out[c, j, k] = acc
                start = stop
    return out


def _mixture_loglik_grid_numpy(z, t_nodes, eps_nodes, checkpoints):
    n = int(checkpoints[-1]) if checkpoints.size else 0
    z = z[:n]
    out = np.zeros((checkpoints.size, t_nodes.size, eps_nodes.size))
    if n == 0:
        return out
    for j, t in enumerate(t_nodes):
        a = np.expm1(t * z - 0.5 * t * t)
        terms = np.log1p(np.multiply.outer(eps_nodes, a))
        cum = np.cumsum(terms, axis=1)
        out[:, j, :] = cum[:, checkpoints - 1].T
    return out


@njit(cache=True, parallel=True)
def _di_statistics_numba(z, u, t_grid, eps, checkpoints, uniform):
    n_rep = z.shape[0]
    n_cp = checkpoints.size
    n_t = t_grid.size
    T0 = np.zeros((n_rep, n_cp, n_t))
    T1 = np.zeros((n_rep, n_cp, n_t))
    n = checkpoints[n_cp - 1]
    om = 1.0 - eps
    c0 = np.empty(n_t)
    dc = np.empty(n_t)
    for j in range(n_t):
        t = t_grid[j]
        c0[j] = eps * math.exp(-0.5 * t * t)
        # a shifted photon has exponent t*(z + t) - t**2/2 = t*z + t**2/2
        dc[j] = eps * math.exp(0.5 * t * t) - c0[j]
    step = t_grid[1] - t_grid[0] if n_t > 1 else 0.0
    for rep in prange(n_rep):
        r = np.empty(n)
        m = np.empty(n)
        flags = np.empty(n)
        for i in range(n):
            x = z[rep, i]
            r[i] = math.exp(t_grid[0] * x)
            m[i] = math.exp(step * x)
            flags[i] = 1.0 if u[rep, i] < eps else 0.0
        for j in range(n_t):
            if j > 0:
                if uniform:
                    for i in range(n):
                        r[i] *= m[i]
                else:
                    t = t_grid[j]
                    for i in range(n):
                        r[i] = math.exp(t * z[rep, i])
            a0 = 0.0
            a1 = 0.0
            start = 0
            for c in range(n_cp):
                stop = checkpoints[c]
                a0 += _sum_log_affine(om, c0[j], 0.0, flags, r, start, stop)
                a1 += _sum_log_affine(om, c0[j], dc[j], flags, r, start, stop)
                T0[rep, c, j] = a0
                T1[rep, c, j] = a1
                start = stop
    return T0, T1


def _di_statistics_numpy(z, u, t_grid, eps, checkpoints, uniform):
    n = int(checkpoints[-1])
    z = z[:, :n]
    shifted = u[:, :n] < eps
    n_rep = z.shape[0]
    T0 = np.zeros((n_rep, checkpoints.size, t_grid.size))
    T1 = np.zeros_like(T0)
    for j, t in enumerate(t_grid):
        l0 = np.log1p(eps * np.expm1(t * z - 0.5 * t * t))
        x1 = np.where(shifted, z + t, z)
        l1 = np.log1p(eps * np.expm1(t * x1 - 0.5 * t * t))
        T0[:, :, j] = np.cumsum(l0, axis=1)[:, checkpoints - 1]
        T1[:, :, j] = np.cumsum(l1, axis=1)[:, checkpoints - 1]
    return T0, T1


def _as_checkpoints(checkpoints):
    cp = np.ascontiguousarray(checkpoints, dtype=np.int64)
    if cp.ndim != 1 or cp.size == 0 or np.any(np.diff(cp) <= 0) or cp[0] < 0:
        raise ValueError("checkpoints must be a strictly increasing, nonempty 1-D array")
    return cp


def _is_uniform(grid):
    if grid.size < 3:
        return True
    d = np.diff(grid)
    return bool(np.allclose(d, d[0], rtol=1e-9, atol=0.0))


def mixture_loglik_grid(z, t_nodes, eps_nodes, checkpoints, backend=None):
    """Prefix sums of the mixture log-likelihood ratio on a (t, eps) grid.

    Returns an array of shape ``(len(checkpoints), len(t_nodes), len(eps_nodes))``
    whose ``[c, j, k]`` entry is the sum over the first ``checkpoints[c]``
    entries of ``z``.
    """
    z = np.ascontiguousarray(z, dtype=np.float64)
    t_nodes = np.ascontiguousarray(t_nodes, dtype=np.float64)
    eps_nodes = np.ascontiguousarray(eps_nodes, dtype=np.float64)
    cp = _as_checkpoints(checkpoints)
    if cp[-1] > z.size:
        raise ValueError("checkpoint exceeds sample size")
    if _pick(backend) == "numba":
        return _mixture_loglik_grid_numba(z, t_nodes, eps_nodes, cp)
    return _mixture_loglik_grid_numpy(z, t_nodes, eps_nodes, cp)


def di_statistics(z, u, t_grid, eps, checkpoints, backend=None):
    """Null and common-random-number alternative log-LR statistics.

    ``z`` holds standard-normal position deviates and ``u`` the uniforms that
    assign photons to the faint source (``u < eps``), both of shape
    ``(replicates, photons)``.  Under the alternative an assigned photon's
    deviate is shifted by ``t``.  Returns ``(T0, T1)`` with shape
    ``(replicates, len(checkpoints), len(t_grid))``.
    """
    z = np.ascontiguousarray(z, dtype=np.float64)
    u = np.ascontiguousarray(u, dtype=np.float64)
    t_grid = np.ascontiguousarray(t_grid, dtype=np.float64)
    cp = _as_checkpoints(checkpoints)
    if z.shape != u.shape or z.ndim != 2:
        raise ValueError("z and u must be 2-D arrays of equal shape")
    if cp[-1] > z.shape[1] or cp[0] < 1:
        raise ValueError("checkpoints must lie in [1, photons]")
    if t_grid.size == 0:
        raise ValueError("empty separation grid")
    if _pick(backend) == "numba":
        return _di_statistics_numba(z, u, t_grid, float(eps), cp, _is_uniform(t_grid))
    return _di_statistics_numpy(z, u, t_grid, float(eps), cp, _is_uniform(t_grid))


def _pick(backend):
    if backend is None:
        return "numba" if USE_NUMBA else "numpy"
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not USE_NUMBA:
        raise RuntimeError("numba backend requested but numba is disabled")
    return backend

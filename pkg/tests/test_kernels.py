import json
import os
import subprocess
import sys

import numpy as np
import pytest

from singular_spade import _jit
from singular_spade.kernels import di_statistics, mixture_loglik_grid

needs_numba = pytest.mark.skipif(not _jit.USE_NUMBA, reason="numba disabled")


def naive_grid(z, t_nodes, eps_nodes, checkpoints):
    out = np.zeros((len(checkpoints), len(t_nodes), len(eps_nodes)))
    for c, n in enumerate(checkpoints):
        for j, t in enumerate(t_nodes):
            for k, e in enumerate(eps_nodes):
                out[c, j, k] = sum(np.log((1 - e) + e * np.exp(t * zi - t * t / 2)) for zi in z[:n])
    return out


def naive_di(z, u, t_grid, eps, checkpoints):
    T0 = np.zeros((z.shape[0], len(checkpoints), len(t_grid)))
    T1 = np.zeros_like(T0)
    for r in range(z.shape[0]):
        for j, t in enumerate(t_grid):
            x1 = np.where(u[r] < eps, z[r] + t, z[r])
            l0 = np.log((1 - eps) + eps * np.exp(t * z[r] - t * t / 2))
            l1 = np.log((1 - eps) + eps * np.exp(t * x1 - t * t / 2))
            for c, n in enumerate(checkpoints):
                T0[r, c, j] = l0[:n].sum()
                T1[r, c, j] = l1[:n].sum()
    return T0, T1


@pytest.fixture
def data():
    rng = np.random.default_rng(0)
    return rng.standard_normal((6, 75)), rng.random((6, 75))


@pytest.mark.parametrize("backend", ["numpy", pytest.param("numba", marks=needs_numba)])
def test_mixture_grid_matches_naive(backend, data):
    z = data[0][0]
    t = np.array([0.0, 0.05, 0.3, 1.7])
    e = np.array([0.0, 0.01, 0.2, 0.9])
    cp = [1, 16, 17, 75]
    np.testing.assert_allclose(mixture_loglik_grid(z, t, e, cp, backend), naive_grid(z, t, e, cp), rtol=1e-12, atol=1e-13)


@pytest.mark.parametrize("backend", ["numpy", pytest.param("numba", marks=needs_numba)])
@pytest.mark.parametrize("t_grid", [[0.01, 0.02, 0.03, 0.04], [0.05, 0.1, 0.4]])
def test_di_statistics_match_naive(backend, data, t_grid):
    z, u = data
    cp = [10, 33, 75]
    got = di_statistics(z, u, t_grid, 0.3, cp, backend)
    ref = naive_di(z, u, np.array(t_grid), 0.3, cp)
    for g, r in zip(got, ref):
        np.testing.assert_allclose(g, r, rtol=1e-11, atol=1e-13)


@needs_numba
def test_extreme_values_use_safe_fallback():
    # products of 16 factors overflow here, forcing per-photon logs
    z = np.full(40, 60.0)
    t = np.array([5.0])
    e = np.array([0.5])
    a = mixture_loglik_grid(z, t, e, [40], "numba")
    b = mixture_loglik_grid(z, t, e, [40], "numpy")
    np.testing.assert_allclose(a, b, rtol=1e-13)
    # eps = 1 leaves only the displaced density, whose block product underflows
    z = np.full(40, -60.0)
    out = mixture_loglik_grid(z, t, np.array([1.0]), [40], "numba")
    assert out[0, 0, 0] == pytest.approx(40 * (5.0 * -60.0 - 12.5), rel=1e-14)


@needs_numba
def test_backends_agree_on_large_batch():
    rng = np.random.default_rng(3)
    z, u = rng.standard_normal((64, 2000)), rng.random((64, 2000))
    t = np.round(np.arange(1, 41) * 0.01, 2)
    a = di_statistics(z, u, t, 0.3, [200, 500, 2000], "numba")
    b = di_statistics(z, u, t, 0.3, [200, 500, 2000], "numpy")
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, rtol=1e-10, atol=1e-11)


def test_argument_validation(data):
    z, u = data
    with pytest.raises(ValueError):
        di_statistics(z, u, [0.1], 0.3, [10, 5])
    with pytest.raises(ValueError):
        di_statistics(z, u[:, :10], [0.1], 0.3, [10])
    with pytest.raises(ValueError):
        mixture_loglik_grid(z[0], [0.1], [0.1], [100])
    with pytest.raises(ValueError):
        mixture_loglik_grid(z[0], [0.1], [0.1], [5], backend="fortran")


def test_env_flag_selects_numpy_backend():
    code = (
        "import json, numpy as np; from singular_spade import _jit; "
        "from singular_spade.testing import di_statistics_mc; "
        "T0, T1 = di_statistics_mc(0.3, np.array([0.1, 0.2]), [50, 100], 40, 5); "
        "print(json.dumps([_jit.BACKEND, T0.tolist(), T1.tolist()]))"
    )
    env = dict(os.environ, SINGULAR_SPADE_NO_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    backend, T0, T1 = json.loads(out.stdout)
    assert backend == "numpy"
    from singular_spade.testing import di_statistics_mc

    ref0, ref1 = di_statistics_mc(0.3, np.array([0.1, 0.2]), [50, 100], 40, 5)
    np.testing.assert_allclose(T0, ref0, rtol=1e-11, atol=1e-12)
    np.testing.assert_allclose(T1, ref1, rtol=1e-11, atol=1e-12)

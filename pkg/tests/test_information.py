import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import logm
from scipy.stats import poisson

from singular_spade.errors import DomainError, IntegrationNotConverged
from singular_spade.information import (
    KL_SCHEMES,
    KlResult,
    bernoulli_kl,
    bernoulli_kl_shift,
    kl_binary_spade_misaligned,
    kl_direct_imaging,
    kl_quantum,
    kl_spade_aligned,
    x_minus_log1p,
)
from singular_spade.optics import GaussianPsf, SceneParams, mode_probs
from singular_spade.quadrature import QuadratureSpec


def mp_di_kl(eps, s, sigma=1.0):
    with mpmath.workdps(30):
        eps, s, sigma = mpmath.mpf(eps), mpmath.mpf(s), mpmath.mpf(sigma)

        def f(x):
            p0 = mpmath.npdf(x, 0, sigma)
            p1 = (1 - eps) * p0 + eps * mpmath.npdf(x, s, sigma)
            return p0 * mpmath.log(p0 / p1)

        return float(mpmath.quad(f, [-30 * sigma, -5 * sigma, 0, s, 5 * sigma, 30 * sigma + s]))


def mp_quantum_kl(eps, s, sigma=1.0):
    # rho1 in the orthonormal basis {psi0, perp}; D = -<psi0|log rho1|psi0>
    with mpmath.workdps(40):
        eps, s, sigma = mpmath.mpf(eps), mpmath.mpf(s), mpmath.mpf(sigma)
        c = mpmath.exp(-(s**2) / (8 * sigma**2))
        b = mpmath.sqrt(1 - c**2)
        rho1 = (1 - eps) * mpmath.matrix([[1, 0], [0, 0]]) + eps * mpmath.matrix([[c * c, c * b], [c * b, b * b]])
        return float(-mpmath.logm(rho1)[0, 0].real)


def mp_bernoulli_kl(p, q):
    with mpmath.workdps(40):
        p, q = mpmath.mpf(p), mpmath.mpf(q)
        return float(p * mpmath.log(p / q) + (1 - p) * mpmath.log((1 - p) / (1 - q)))


def full_mode_kl(scene, psf):
    # KL of the full Hermite-Gaussian count distribution with the sorter at theta
    theta, s, eps = scene.theta, scene.s, scene.epsilon
    q_max = 80
    p0 = mode_probs(theta, psf, q_max)
    ps = mode_probs(s - theta, psf, q_max)
    p1 = (1 - eps) * p0 + eps * ps
    mask = p0 > 0
    return float(np.sum(p0[mask] * np.log(p0[mask] / p1[mask])))


def test_kl_result_properties():
    r = KlResult(2.0, 1.0)
    assert r.ratio == 2.0 and r.relative_gap == 0.5
    assert math.isnan(KlResult(0.0, 0.0).ratio)


def test_x_minus_log1p_matches_mpmath():
    xs = np.array([-0.9, -1e-2, -1e-4, -1e-9, 0.0, 1e-9, 1e-4, 9.9e-4, 1.01e-3, 0.5, 10.0])
    got = x_minus_log1p(xs)
    for x, g in zip(xs, got):
        with mpmath.workdps(50):
            ref = float(mpmath.mpf(x) - mpmath.log1p(mpmath.mpf(x)))
        assert g == pytest.approx(ref, rel=1e-14, abs=1e-300)


@pytest.mark.parametrize("p,q,expected", [(0.5, 0.5, 0.0), (0.5, 0.25, 0.5 * math.log(2) + 0.5 * math.log(2 / 3)), (0.0, 0.5, math.log(2))])
def test_bernoulli_kl_examples(p, q, expected):
    assert bernoulli_kl(p, q) == pytest.approx(expected, rel=1e-14, abs=1e-300)


@pytest.mark.parametrize("p,q", [(0.3, 0.0), (0.3, 1.0), (1.2, 0.5), (0.5, -0.1)])
def test_bernoulli_kl_domain(p, q):
    with pytest.raises(DomainError):
        bernoulli_kl(p, q)


def test_bernoulli_kl_shift_keeps_tiny_shifts():
    p, delta = 0.9975, 1e-12
    ref = mp_bernoulli_kl(mpmath.mpf(p), mpmath.mpf(p) + mpmath.mpf(delta))
    assert bernoulli_kl_shift(p, delta) == pytest.approx(ref, rel=1e-6)


def test_di_examples(psf):
    assert kl_direct_imaging(SceneParams(0.0, 0.4), psf) == KlResult(0.0, 0.0)
    small = kl_direct_imaging(SceneParams(0.01, 0.05), psf)
    assert 0.95 <= small.ratio <= 1.05
    r = kl_direct_imaging(SceneParams(0.1, 0.25), psf)
    assert r.leading == pytest.approx(3.125e-4, rel=1e-15)
    assert r.exact == pytest.approx(mp_di_kl(0.1, 0.25), rel=1e-10)


@pytest.mark.parametrize("eps,s", [(0.3, 0.5), (0.05, 2.0), (0.9, 3.0), (0.5, 0.01)])
def test_di_against_mpmath(psf, eps, s):
    assert kl_direct_imaging(SceneParams(eps, s), psf).exact == pytest.approx(mp_di_kl(eps, s), rel=1e-9)


def test_di_theta_invariance(psf):
    a = kl_direct_imaging(SceneParams(0.2, 0.3, 0.0), psf).exact
    b = kl_direct_imaging(SceneParams(0.2, 0.3, 0.7), psf).exact
    assert abs(a - b) <= 1e-10 * a


def test_di_reports_non_convergence(psf):
    with pytest.raises(IntegrationNotConverged):
        kl_direct_imaging(SceneParams(0.3, 0.5), psf, QuadratureSpec(8, 1, 1e-300))


def test_spade_examples(psf):
    assert kl_spade_aligned(SceneParams(0.0, 0.5), psf).exact == 0.0
    r = kl_spade_aligned(SceneParams(0.3, 0.2), psf)
    assert r.exact == pytest.approx(-math.log(0.7 + 0.3 * math.exp(-0.01)), rel=1e-13)
    assert r.exact == pytest.approx(full_mode_kl(SceneParams(0.3, 0.2, 0.0), psf), rel=1e-12)
    assert 0.98 <= kl_spade_aligned(SceneParams(0.01, 0.05), psf).ratio <= 1.02


def test_quantum_examples(psf):
    assert kl_quantum(SceneParams(0.0, 1.0), psf).exact == 0.0
    assert kl_quantum(SceneParams(0.3, 60.0), psf).exact == pytest.approx(-math.log(0.7), rel=1e-12)
    assert kl_quantum(SceneParams(0.3, 1e-9), psf).exact == 0.0
    assert kl_quantum(SceneParams(1.0, 0.5), psf).exact == math.inf
    r = kl_quantum(SceneParams(0.3, 0.5), psf)
    assert r.exact == pytest.approx(mp_quantum_kl(0.3, 0.5), rel=1e-13)
    assert r.leading == pytest.approx(0.3 * (1 - math.exp(-0.5**2 / 4)), rel=1e-14)
    # exact/leading from the oracle, not the [0.8, 1.2] band (see ledger)
    assert r.ratio == pytest.approx(mp_quantum_kl(0.3, 0.5) / r.leading, rel=1e-12)


@pytest.mark.parametrize("eps,s", [(0.3, 0.5), (1e-4, 1e-3), (0.7, 2.0), (0.01, 4.0)])
def test_quantum_against_scipy_logm(psf, eps, s):
    c = math.exp(-(s**2) / 8)
    psi0 = np.array([1.0, 0.0])
    psis = np.array([c, math.sqrt(1 - c * c)])
    rho1 = (1 - eps) * np.outer(psi0, psi0) + eps * np.outer(psis, psis)
    ref = -float(np.real(logm(rho1))[0, 0])
    assert kl_quantum(SceneParams(eps, s), psf).exact == pytest.approx(ref, rel=1e-7)
    assert kl_quantum(SceneParams(eps, s), psf).exact == pytest.approx(mp_quantum_kl(eps, s), rel=1e-12)


def test_binary_spade_examples(psf):
    assert kl_binary_spade_misaligned(SceneParams(0.3, 0.2, 0.1), psf).exact == 0.0
    assert kl_binary_spade_misaligned(SceneParams(0.0, 0.3, 0.1), psf).exact == 0.0
    r = kl_binary_spade_misaligned(SceneParams(0.3, 0.05, 0.1), psf)
    with mpmath.workdps(40):
        p0 = mpmath.exp(-mpmath.mpf("0.05") ** 2)
        ps = mpmath.exp(-(mpmath.mpf("0.05") - mpmath.mpf("0.025")) ** 2)
        p1 = (1 - mpmath.mpf("0.3")) * p0 + mpmath.mpf("0.3") * ps
        exact = p0 * mpmath.log(p0 / p1) + (1 - p0) * mpmath.log((1 - p0) / (1 - p1))
        leading = (p1 - p0) ** 2 / (2 * p0 * (1 - p0))
    assert r.exact == pytest.approx(float(exact), rel=1e-10)
    assert r.leading == pytest.approx(float(leading), rel=1e-10)
    assert r.ratio == pytest.approx(float(exact / leading), rel=1e-9)


def test_binary_spade_needs_offset(psf):
    with pytest.raises(DomainError):
        kl_binary_spade_misaligned(SceneParams(0.3, 0.2, 0.0), psf)


@pytest.mark.parametrize("theta", [0.1, 0.4, 1.0])
@pytest.mark.parametrize("s", [0.05, 0.3, 1.0, 2.5])
def test_data_processing_chain(psf, theta, s):
    scene = SceneParams(0.3, s, theta)
    binary = kl_binary_spade_misaligned(scene, psf).exact
    full = full_mode_kl(scene, psf)
    quantum = kl_quantum(scene, psf).exact
    di = kl_direct_imaging(scene, psf).exact
    assert binary <= full * (1 + 1e-10)
    assert full <= quantum * (1 + 1e-10)
    assert di <= quantum * (1 + 1e-10)


@settings(max_examples=25, deadline=None)
@given(
    st.floats(0.0, 0.95),
    st.floats(0.01, 3.0),
    st.floats(0.05, 1.0),
    st.floats(0.2, 5.0),
)
def test_scale_covariance(eps, s, theta, c):
    unit, scaled = GaussianPsf(1.0), GaussianPsf(c)
    for name, fn in KL_SCHEMES.items():
        a = fn(SceneParams(eps, s, theta), unit).exact
        b = fn(SceneParams(eps, c * s, c * theta), scaled).exact
        assert abs(a - b) <= 1e-10 * max(abs(a), 1e-300) + 1e-300, name


def test_direct_imaging_leading_limit(psf):
    ratios = [kl_direct_imaging(SceneParams(0.1 * t, 0.5 * t), psf).ratio for t in (1.0, 0.5, 0.25, 0.125)]
    errors = [abs(r - 1) for r in ratios]
    assert errors == sorted(errors, reverse=True)
    assert errors[-1] < 5e-3

"""Kullback-Leibler informations of the one-vs-two-source problem.

Every function returns a :class:`KlResult` carrying the exact divergence (in
nats) and the leading small-parameter term it is usually quoted by.  The
bright source sits at the origin and the faint one at ``+s`` (for direct
imaging, at ``theta`` and ``theta + s``, which leaves the divergence
unchanged).
"""
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .optics import p0_density, source_overlap
from .quadrature import QuadratureSpec, composite_gauss_legendre, refine_until_converged

_GAP_FLOOR = 1e-300
_ATANH_TERMS = 20  # |y| <= 1/3 on the series branch, so 9^-20 is far below rounding

#: Default rule for the direct-imaging integral: 16-point panels, doubling.
DI_QUADRATURE = QuadratureSpec(nodes_per_axis=16, refinement_levels=6, rel_tol=1e-10)
_DI_INITIAL_PANELS = 8
_DI_HALF_WIDTH = 20.0


@dataclass(frozen=True)
class KlResult:
    exact: float
    leading: float

    @property
    def relative_gap(self):
        return abs(self.exact - self.leading) / max(self.exact, _GAP_FLOOR)

    @property
    def ratio(self):
        """``exact / leading`` (nan when the leading term vanishes)."""
        if self.leading == 0.0:
            return math.nan
        return self.exact / self.leading


def x_minus_log1p(x):
    """``x - log(1 + x)`` without cancellation near zero (elementwise)."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 0.5
    xs = x[small]
    # log1p(x) = 2 atanh(y) with y = x / (2 + x), and x - 2y = x^2 / (2 + x) exactly;
    # both remaining pieces are of fixed sign, so nothing cancels
    y = xs / (2.0 + xs)
    y2 = y * y
    tail = np.zeros_like(y)
    for k in range(_ATANH_TERMS, 0, -1):
        tail = 1.0 / (2 * k + 1) + y2 * tail
    out[small] = xs * xs / (2.0 + xs) - 2.0 * y * y2 * tail
    xl = x[~small]
    out[~small] = xl - np.log1p(xl)
    return out if out.ndim else float(out)


def bernoulli_kl(p, q):
    """KL divergence ``D(Bern(p) || Bern(q))`` in nats, with ``0 log 0 = 0``."""
    p = float(p)
    q = float(q)
    if not 0.0 <= p <= 1.0 or not 0.0 <= q <= 1.0:
        raise DomainError("Bernoulli parameters must lie in [0, 1]")
    return bernoulli_kl_shift(p, q - p)


def bernoulli_kl_shift(p, delta):
    """``D(Bern(p) || Bern(p + delta))`` computed from the shift ``delta``.

    Passing the shift directly (instead of ``p + delta``) keeps full relative
    accuracy when ``delta`` is far below the rounding error of ``p``.
    """
    q = p + delta
    if q < 0.0 or q > 1.0:
        raise DomainError("p + delta must lie in [0, 1]")
    if (q == 0.0 and p > 0.0) or (q == 1.0 and p < 1.0):
        raise DomainError("alternative assigns zero mass where the null does not")
    if delta == 0.0:
        return 0.0
    if p == 0.0:
        return -math.log1p(-delta)
    if p == 1.0:
        return -math.log1p(delta)
    # the linear terms +delta and -delta cancel, leaving two nonnegative pieces
    return p * x_minus_log1p(delta / p) + (1.0 - p) * x_minus_log1p(-delta / (1.0 - p))


def kl_direct_imaging(scene, psf, quad=DI_QUADRATURE):
    """``D(p0 || p1)`` for image-plane detection, by composite Gauss-Legendre.

    The bright source is placed at ``scene.theta``; the divergence does not
    depend on that choice.  Leading term: ``eps^2 s^2 / (2 sigma^2)``.
    """
    eps, s, theta, sigma = scene.epsilon, scene.s, scene.theta, psf.sigma
    leading = eps**2 * s**2 / (2.0 * sigma**2)
    if eps == 0.0 or s == 0.0:
        return KlResult(0.0, leading)
    lo = theta - _DI_HALF_WIDTH * sigma
    hi = theta + _DI_HALF_WIDTH * sigma + s

    def integral(level):
        x, w = composite_gauss_legendre(quad.nodes_per_axis, lo, hi, _DI_INITIAL_PANELS * 2**level)
        y = (x - theta) / sigma
        t = s / sigma
        a = eps * np.expm1(t * y - 0.5 * t * t)
        # -log(1 + a) integrates to x_minus_log1p(a) since E_0[a] = 0 exactly
        return float(np.sum(w * p0_density(x - theta, psf) * x_minus_log1p(a)))

    exact = refine_until_converged(integral, quad, what="direct-imaging KL")
    return KlResult(max(exact, 0.0), leading)


def kl_spade_aligned(scene, psf):
    """Aligned SPADE: the null puts every photon in q=0, so only P1(0) matters.

    Exact value ``-log((1-eps) + eps e^{-tau})``; leading ``eps s^2 / (4 sigma^2)``.
    """
    eps = scene.epsilon
    tau = scene.s**2 / (4.0 * psf.sigma**2)
    leak = -math.expm1(-tau)
    exact = -math.log1p(-eps * leak) if eps * leak < 1.0 else math.inf
    return KlResult(exact, eps * tau)


def _sym2_eig(a, h, d):
    """Eigenvalues (small, large) and the e1-weight of the small eigenvector.

    For the symmetric matrix [[a, h], [h, d]] with unit trace, computed so the
    small eigenvalue keeps full relative accuracy.
    """
    det = a * d - h * h
    disc = math.sqrt(max((a - d) ** 2 + 4.0 * h * h, 0.0))
    tr = a + d
    big = 0.5 * (tr + disc)
    small = det / big if big > 0 else 0.0
    # two candidate eigenvectors for `small`; keep the better conditioned one
    v1 = (h, small - a)
    v2 = (small - d, h)
    vx, vy = v1 if math.hypot(*v1) >= math.hypot(*v2) else v2
    norm2 = vx * vx + vy * vy
    weight = vx * vx / norm2 if norm2 > 0 else 0.0
    return small, big, weight


def kl_quantum(scene, psf):
    """Quantum relative entropy ``D(rho0 || rho1)`` of the rank-two model.

    ``rho0`` is pure, so ``D = -<psi0| log rho1 |psi0>``, evaluated in the
    orthonormal basis {psi0, (psi_s - c psi0)/b} with ``c = <psi0|psi_s>`` and
    ``b = sqrt(1 - c^2)``.  Leading term: ``eps (1 - c^2)``.
    """
    eps = scene.epsilon
    c = source_overlap(scene.s, psf)
    b2 = -math.expm1(-scene.s**2 / (4.0 * psf.sigma**2))
    leading = eps * b2
    if eps == 0.0 or b2 < 1e-14:
        # states numerically parallel: rho1 == rho0
        return KlResult(0.0, leading)
    if eps == 1.0:
        return KlResult(math.inf, leading)
    b = math.sqrt(b2)
    a = 1.0 - eps * b2
    h = eps * c * b
    d = eps * b2
    small, big, w_small = _sym2_eig(a, h, d)
    log_big = math.log1p(-small)  # trace is one
    exact = -(w_small * math.log(small) + (1.0 - w_small) * log_big)
    return KlResult(max(exact, 0.0), leading)


def binary_spade_shift(scene, psf):
    """``(p0, delta)`` of misaligned binary SPADE, main-text parameterisation.

    ``p0 = exp(-gamma^2)`` is the q=0 rate of the bright source at the origin
    seen by a demultiplexer centred at ``theta``; the two-source rate is
    ``p0 + delta`` with ``delta = eps (exp(-(gamma - g_s)^2) - p0)``, written as
    ``eps p0 expm1(g_s (2 gamma - g_s))`` so it vanishes exactly at ``s = 2 theta``.
    """
    gamma = scene.gamma(psf)
    g = scene.g_s(psf)
    p0 = math.exp(-gamma * gamma)
    delta = scene.epsilon * p0 * math.expm1(g * (2.0 * gamma - g))
    return p0, delta


def kl_binary_spade_misaligned(scene, psf):
    """Bernoulli KL of misaligned binary SPADE (q=0 versus q>=1).

    Leading term ``delta^2 / (2 p0 (1 - p0))``.  Requires ``0 < p0 < 1``,
    i.e. a nonzero, finite detector offset.
    """
    p0, delta = binary_spade_shift(scene, psf)
    one_minus_p0 = -math.expm1(-scene.gamma(psf) ** 2)
    if not (p0 > 0.0 and one_minus_p0 > 0.0):
        raise DomainError("binary SPADE needs 0 < p0(theta) < 1 (nonzero detector offset)")
    exact = bernoulli_kl_shift(p0, delta)
    leading = delta * delta / (2.0 * p0 * one_minus_p0)
    return KlResult(exact, leading)


KL_SCHEMES = {
    "DI": kl_direct_imaging,
    "SPADE": kl_spade_aligned,
    "quantum": kl_quantum,
    "bSPADE": kl_binary_spade_misaligned,
}

"""Pole structure of local zeta functions and the binary-SPADE local statistics.

The first half deals with monomial Kullback-Leibler functions
``K(eps, s) ~ eps^a s^b`` near the one-source point: their local zeta
function factorises into one-dimensional integrals, so the rightmost pole and
its order (the real log canonical threshold and multiplicity) can be read
off the exponents.  The second half holds the centred-coordinate expansion of
misaligned binary SPADE (sources at ``-eps s`` and ``(1-eps) s``) and the
normalised local statistics obtained from it.
"""
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateCoefficient, DomainError
from .quadrature import QuadratureSpec, gauss_legendre, refine_until_converged

#: Tensor rule used for the local statistics J(xi; B).
J_QUADRATURE = QuadratureSpec(nodes_per_axis=128, refinement_levels=3, rel_tol=1e-9)

_DEGENERATE_A = 1e-14


@dataclass(frozen=True)
class MonomialKl:
    """Exponents of a normal-crossing KL function ``eps^a_eps * s^a_s``."""

    a_eps: int
    a_s: int

    def __post_init__(self):
        for name in ("a_eps", "a_s"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise DomainError(f"{name} must be a positive integer, got {value!r}")


@dataclass(frozen=True)
class PoleStructure:
    """Real log canonical threshold and its multiplicity."""

    rlct: Fraction
    multiplicity: int

    @property
    def pole(self):
        """Location of the rightmost pole, ``-rlct``."""
        return -self.rlct


DIRECT_IMAGING_KL = MonomialKl(2, 2)
ALIGNED_SPADE_KL = MonomialKl(1, 2)


def zeta_pole_structure(m):
    """Rightmost pole of ``int_0^d int_0^d (eps^a s^b)^z d eps ds``.

    The integral is ``d^(a z + 1) d^(b z + 1) / ((a z + 1)(b z + 1))``, so the
    rightmost pole sits at ``-1/max(a, b)`` with order equal to the number of
    exponents attaining the maximum.
    """
    top = max(m.a_eps, m.a_s)
    order = (m.a_eps == top) + (m.a_s == top)
    return PoleStructure(Fraction(1, top), int(order))


def local_zeta(z, m, delta=1.0):
    """Closed-form local zeta integral over ``[0, delta]^2`` (for ``z > -rlct``)."""
    f_eps = m.a_eps * z + 1.0
    f_s = m.a_s * z + 1.0
    if f_eps <= 0 or f_s <= 0:
        raise DomainError("local zeta integral diverges for this z")
    return delta**f_eps / f_eps * delta**f_s / f_s


def free_energy_asymptote(n, pole):
    """``lambda log n - (m - 1) log log n`` in nats."""
    if n < 3:
        raise DomainError("free-energy asymptote needs n >= 3")
    return float(pole.rlct) * math.log(n) - (pole.multiplicity - 1) * math.log(math.log(n))


def local_shift_coefficient(theta, psf):
    """Coefficient ``a(theta)`` of ``eps(1-eps) s^2`` in the binary-SPADE shift.

    ``a = exp(-gamma^2) (2 gamma^2 - 1) / (4 sigma^2)`` with ``gamma = theta / (2 sigma)``.
    """
    gamma = theta / (2.0 * psf.sigma)
    g2 = gamma * gamma
    return math.exp(-g2) * (2.0 * g2 - 1.0) / (4.0 * psf.sigma**2)


@dataclass(frozen=True)
class LocalModelParams:
    gamma: float
    a_theta: float
    B: float

    def __post_init__(self):
        if not self.B > 0:
            raise DomainError("local cap B must be positive")


def local_model_params(theta, psf, B=5.0):
    return LocalModelParams(theta / (2.0 * psf.sigma), local_shift_coefficient(theta, psf), B)


def delta_centered(scene, psf):
    """Exact shift ``q - p0(theta)`` with sources at ``-eps s`` and ``(1 - eps) s``.

    Written as ``p0 [(1-eps) expm1(...) + eps expm1(...)]`` so that it is
    exactly zero for ``s = 0`` and for ``eps = 0``.
    """
    eps = scene.epsilon
    gamma = scene.gamma(psf)
    beta = scene.s / (2.0 * psf.sigma)
    p0 = math.exp(-gamma * gamma)
    # gamma^2 - (gamma + eps beta)^2 and gamma^2 - (gamma - (1-eps) beta)^2
    e1 = -eps * beta * (2.0 * gamma + eps * beta)
    e2 = (1.0 - eps) * beta * (2.0 * gamma - (1.0 - eps) * beta)
    return p0 * ((1.0 - eps) * math.expm1(e1) + eps * math.expm1(e2))


def local_rescale_separation(y, n, theta, psf):
    """Physical separation at local coordinate ``y`` for ``n`` photons.

    ``s = (sqrt(p0 (1 - p0)) / |a(theta)|)^(1/2) y n^(-1/4)``.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    a = local_shift_coefficient(theta, psf)
    if abs(a) < _DEGENERATE_A:
        raise DegenerateCoefficient(f"a(theta) = {a!r} vanishes; no n^(-1/4) rescaling")
    gamma2 = (theta / (2.0 * psf.sigma)) ** 2
    p0 = math.exp(-gamma2)
    one_minus_p0 = -math.expm1(-gamma2)
    if not (p0 > 0.0 and one_minus_p0 > 0.0):
        raise DomainError("rescaling needs 0 < p0(theta) < 1")
    scale = math.sqrt(math.sqrt(p0 * one_minus_p0) / abs(a))
    # two correctly rounded square roots keep s(16n) = s(n) / 2 exact
    return scale * y / math.sqrt(math.sqrt(n))


def _log_j(xi, B, sign, nodes):
    eps, w_eps = gauss_legendre(nodes, 0.0, 1.0)
    y, w_y = gauss_legendre(nodes, 0.0, B)
    u = (eps * (1.0 - eps))[:, None]
    y2 = (y * y)[None, :]
    expo = sign * 0.5 * (u * y2) ** 2 + xi * u * y2
    return float(logsumexp(expo, b=np.multiply.outer(w_eps, w_y)))


def log_j_statistic(xi, B, sign, quad=J_QUADRATURE):
    """Logarithm of :func:`j_statistic` (finite even where J overflows)."""
    if not B > 0:
        raise DomainError("B must be positive")
    if sign not in (1, -1):
        raise DomainError("sign must be +1 or -1")
    levels = quad.levels()
    return refine_until_converged(
        lambda k: _log_j(float(xi), float(B), sign, levels[k]), quad, absolute=True, what="J statistic"
    )


def j_statistic(xi, B, sign, quad=J_QUADRATURE):
    """Local binary-SPADE statistic ``J^(sign)(xi; B)``.

    ``int_0^1 d eps int_0^B dy exp(sign * u^2 y^4 / 2 + xi u y^2)`` with
    ``u = eps (1 - eps)``; ``sign = -1`` is the null-local form, ``+1`` the
    alternative-local one.  Tensor Gauss-Legendre with doubling refinement.
    """
    return math.exp(log_j_statistic(xi, B, sign, quad))

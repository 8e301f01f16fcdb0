"""Gaussian PSF, image-plane densities and Hermite-Gaussian mode statistics.

All lengths are in the same (arbitrary) unit as ``GaussianPsf.sigma``.  The
bright source sits at the origin unless a function says otherwise.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, xlogy

from .errors import DomainError


@dataclass(frozen=True)
class GaussianPsf:
    """Gaussian point-spread function of width ``sigma``.

    The field amplitude is ``(2 pi sigma^2)^(-1/4) exp(-x^2 / (4 sigma^2))``, so
    the photon-position density is the normal density N(0, sigma^2).
    """

    sigma: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise DomainError(f"sigma must be positive and finite, got {self.sigma!r}")

    def amplitude(self, x):
        x = np.asarray(x, dtype=float)
        return (2.0 * math.pi * self.sigma**2) ** -0.25 * np.exp(-(x**2) / (4.0 * self.sigma**2))

    def intensity(self, x):
        return p0_density(x, self)

    def tau(self, s):
        """Mean mode occupation ``s^2 / (4 sigma^2)`` of a source displaced by ``s``."""
        return np.square(s) / (4.0 * self.sigma**2)


@dataclass(frozen=True)
class SceneParams:
    """Relative brightness ``epsilon``, separation ``s`` and detector offset ``theta``."""

    epsilon: float
    s: float
    theta: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise DomainError(f"epsilon must lie in [0, 1], got {self.epsilon!r}")
        if not (self.s >= 0.0 and math.isfinite(self.s)):
            raise DomainError(f"separation must be finite and >= 0, got {self.s!r}")
        if not math.isfinite(self.theta):
            raise DomainError("theta must be finite")

    def gamma(self, psf):
        """Detector offset in units of ``2 sigma``."""
        return self.theta / (2.0 * psf.sigma)

    def g_s(self, psf):
        """Separation in units of ``2 sigma``."""
        return self.s / (2.0 * psf.sigma)


def p0_density(x, psf):
    """Single-source image-plane density |psi(x)|^2 = N(0, sigma^2)."""
    x = np.asarray(x, dtype=float)
    sigma = psf.sigma
    out = np.exp(-0.5 * (x / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi))
    return out if out.ndim else float(out)


def p1_density(x, scene, psf):
    """Two-source density ``(1-eps) |psi(x)|^2 + eps |psi(x-s)|^2``."""
    x = np.asarray(x, dtype=float)
    eps = scene.epsilon
    out = (1.0 - eps) * p0_density(x, psf) + eps * p0_density(x - scene.s, psf)
    return out if np.ndim(out) else float(out)


def mode_truncation(tau):
    """Number of modes to keep so the Poisson(tau) tail is below ~1e-12."""
    return max(20, int(math.ceil(tau + 10.0 * math.sqrt(tau) + 10.0)))


def log_mode_prob(q, s, psf):
    """Log of :func:`mode_prob`; ``-inf`` where the probability vanishes."""
    q = np.asarray(q)
    if np.any(q < 0) or not np.all(np.equal(np.mod(q, 1), 0)):
        raise DomainError("mode index must be a nonnegative integer")
    tau = psf.tau(s)
    out = xlogy(q, tau) - tau - gammaln(q + 1.0)
    return out if np.ndim(out) else float(out)


def mode_prob(q, s, psf):
    """Occupation of Hermite-Gaussian mode ``q`` by a source displaced by ``s``.

    Poisson with mean ``tau = s^2 / (4 sigma^2)``; evaluated in log space so
    large ``q`` neither overflows nor underflows prematurely.
    """
    out = np.exp(log_mode_prob(q, s, psf))
    return out if np.ndim(out) else float(out)


def mode_probs(s, psf, q_max=None):
    """Vector of mode occupations for ``q = 0 .. q_max`` (default truncation)."""
    if q_max is None:
        q_max = mode_truncation(float(psf.tau(s)))
    return mode_prob(np.arange(q_max + 1), s, psf)


def higher_mode_weight(s, psf):
    """Total weight in modes ``q >= 2``: ``1 - e^{-tau} (1 + tau)``, cancellation-free."""
    tau = float(psf.tau(s))
    if tau < 0.1:
        # e^{-tau} sum_{k>=2} tau^k / k!, summed directly for small tau
        total, term, k = 0.0, tau * tau / 2.0, 2
        while term > 1e-18 * max(total, 1e-300):
            total += term
            k += 1
            term *= tau / k
        return math.exp(-tau) * total
    return -math.expm1(-tau) - tau * math.exp(-tau)


def source_overlap(s, psf):
    """Overlap <psi_0|psi_s> = exp(-s^2 / (8 sigma^2)) of two displaced PSF states."""
    out = np.exp(-np.square(s) / (8.0 * psf.sigma**2))
    return out if np.ndim(out) else float(out)


def q0_detection_prob(source_pos, detector_offset, psf):
    """Probability that a photon from ``source_pos`` is sorted into the q=0 mode.

    The demultiplexer's mode basis is centred at ``detector_offset``; the
    result is ``exp(-((detector_offset - source_pos) / (2 sigma))^2)``.
    """
    d = (np.asarray(detector_offset, dtype=float) - source_pos) / (2.0 * psf.sigma)
    out = np.exp(-np.square(d))
    return out if np.ndim(out) else float(out)

"""Gauss-Legendre rules with doubling refinement."""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, IntegrationNotConverged


@dataclass(frozen=True)
class QuadratureSpec:
    """Node count, number of doublings allowed, and stopping tolerance.

    ``rel_tol`` is compared against the change between two successive levels,
    relative to the magnitude of the finer result (or absolutely, for
    log-domain quantities where noted by the caller).
    """

    nodes_per_axis: int = 16
    refinement_levels: int = 4
    rel_tol: float = 1e-10

    def __post_init__(self):
        if int(self.nodes_per_axis) != self.nodes_per_axis or self.nodes_per_axis < 8:
            raise DomainError("nodes_per_axis must be an integer >= 8")
        if int(self.refinement_levels) != self.refinement_levels or self.refinement_levels < 1:
            raise DomainError("refinement_levels must be a positive integer")
        if not self.rel_tol > 0:
            raise DomainError("rel_tol must be positive")

    def levels(self):
        """Node counts tried in order: N, 2N, 4N, ... (``refinement_levels + 1`` entries)."""
        return [self.nodes_per_axis * 2**k for k in range(self.refinement_levels + 1)]


@lru_cache(maxsize=64)
def _leggauss(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n, a, b):
    """Nodes and weights of the ``n``-point rule mapped to ``[a, b]``."""
    x, w = _leggauss(int(n))
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def composite_gauss_legendre(n, a, b, panels):
    """Composite rule with ``panels`` equal panels of ``n`` nodes each."""
    edges = np.linspace(a, b, panels + 1)
    x, w = _leggauss(int(n))
    half = 0.5 * np.diff(edges)
    nodes = edges[:-1, None] + half[:, None] * (x[None, :] + 1.0)
    weights = half[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


def refine_until_converged(evaluate, spec, absolute=False, what="integral"):
    """Call ``evaluate(level_index)`` for successive levels until two agree.

    With ``absolute=True`` the tolerance bounds the absolute change (used for
    log-domain results, where it is a relative bound on the underlying
    integral).
    """
    previous = evaluate(0)
    change = float("nan")
    for level in range(1, spec.refinement_levels + 1):
        current = evaluate(level)
        change = abs(current - previous)
        scale = 1.0 if absolute else max(abs(current), 1e-300)
        if change <= spec.rel_tol * scale:
            return current
        previous = current
    raise IntegrationNotConverged(
        f"{what} did not converge to {spec.rel_tol:g} within "
        f"{spec.refinement_levels} refinements (last change {change:.3e})"
    )

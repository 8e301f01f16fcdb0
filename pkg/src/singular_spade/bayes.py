"""Finite-n Bayes free energies of aligned direct imaging under H0.

The composite alternative carries a uniform prior on a box
``[0, eps_max] x [0, s_max]``.  :func:`free_energy_exact` integrates the
exact mixture likelihood ratio over that box, and :func:`free_energy_local`
integrates its Gaussian local approximation, which depends on ``(eps, s)``
only through ``u = eps * s``.  Both are reported centred by
``log(n)/2 - log(log(n))``.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf, erfcx, logsumexp

from .errors import DomainError, EmptyInput, IntegrationNotConverged
from .kernels import mixture_loglik_grid
from .quadrature import QuadratureSpec, gauss_legendre, refine_until_converged

#: Default rule for the prior integrals; the tolerance is absolute in log units.
BAYES_QUADRATURE = QuadratureSpec(nodes_per_axis=16, refinement_levels=3, rel_tol=1e-9)

APPENDIX_WINDOWS = ((0.10, 0.25), (0.10, 0.30), (0.15, 0.40))
APPENDIX_N_GRID = (32, 64, 128, 256, 512, 1024, 2048)
APPENDIX_SEED = 12345

_H0_STREAM = 0
_SQRT_PI_2 = 0.5 * math.sqrt(math.pi)


@dataclass(frozen=True)
class PriorWindow:
    """Uniform prior on ``[0, eps_max] x [0, s_max]`` (``s_max`` in length units)."""

    eps_max: float
    s_max: float

    def __post_init__(self):
        if not 0.0 < self.eps_max < 1.0:
            raise DomainError("eps_max must lie in (0, 1)")
        if not self.s_max > 0.0:
            raise DomainError("s_max must be positive")

    def d_max_lead(self, psf):
        """Largest leading-order direct-imaging KL in the window."""
        return self.eps_max**2 * self.s_max**2 / (2.0 * psf.sigma**2)


@dataclass(frozen=True)
class FreeEnergyRecord:
    n: int
    f_exact: float
    f_local: float
    centered_exact: float
    centered_local: float
    replicate_id: int
    seed: int


def h0_generator(seed, replicate):
    """Independent generator for replicate ``replicate`` of master ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(_H0_STREAM, int(replicate)))
    return np.random.Generator(np.random.PCG64(ss))


def simulate_h0(n, psf, seed, replicate=0):
    """``n`` draws from N(0, sigma^2), keyed by ``(seed, replicate)``.

    Draws are sequential, so a shorter sample is a prefix of a longer one
    with the same key.
    """
    if n < 0:
        raise DomainError("n must be >= 0")
    return psf.sigma * h0_generator(seed, replicate).standard_normal(int(n))


def _window_rule(window, psf, nodes):
    t, wt = gauss_legendre(nodes, 0.0, window.s_max / psf.sigma)
    e, we = gauss_legendre(nodes, 0.0, window.eps_max)
    # uniform prior density folded into the weights
    log_w = np.log(wt / (window.s_max / psf.sigma))[:, None] + np.log(we / window.eps_max)[None, :]
    return t, e, log_w


def _log_marginal_ratio_prefixes(sample, window, psf, quad, checkpoints):
    z = np.asarray(sample, dtype=float) / psf.sigma
    checkpoints = np.asarray(checkpoints, dtype=np.int64)
    levels = quad.levels()

    def level_values(k):
        t, e, log_w = _window_rule(window, psf, levels[k])
        grid = mixture_loglik_grid(z, t, e, checkpoints)
        return np.array([logsumexp(g + log_w) for g in grid])

    previous = level_values(0)
    change = math.nan
    for k in range(1, quad.refinement_levels + 1):
        current = level_values(k)
        change = float(np.max(np.abs(current - previous)))
        if change <= quad.rel_tol:
            return current
        previous = current
    raise IntegrationNotConverged(
        f"marginal likelihood did not converge to {quad.rel_tol:g} (last change {change:.3e})"
    )


def log_marginal_ratio(sample, window, psf, quad=BAYES_QUADRATURE):
    """``log(m1 / m0)`` for direct-imaging data ``sample`` (positions).

    Tensor Gauss-Legendre over the prior window with log-sum-exp over nodes;
    successive node doublings must agree within ``quad.rel_tol`` (in log
    units, i.e. relative accuracy of ``m1 / m0``).
    """
    sample = np.asarray(sample, dtype=float)
    if sample.size == 0:
        return 0.0
    return float(_log_marginal_ratio_prefixes(sample, window, psf, quad, [sample.size])[0])


def free_energy_exact(sample, window, psf, quad=BAYES_QUADRATURE):
    """``F_n = F_1 - F_0 = -log(m1 / m0)`` (nats)."""
    return -log_marginal_ratio(sample, window, psf, quad)


def log_gaussian_segment(a, b, v):
    """``log int_0^v exp(a u - b u^2) du`` for ``b > 0`` and ``v > 0`` (vectorised in ``v``).

    Uses scaled complementary error functions so that neither the
    ``exp(a^2 / 4b)`` prefactor nor the difference of error functions
    overflows or cancels.
    """
    v = np.asarray(v, dtype=float)
    k = math.sqrt(b)
    alpha = -a / (2.0 * k)
    beta = k * v + alpha
    # alpha^2 - beta^2, factored to avoid cancellation
    d2 = -k * v * (alpha + beta)
    base = math.log(_SQRT_PI_2) - math.log(k)
    out = np.empty_like(v)
    right = alpha >= 0.0
    left = beta <= 0.0
    mid = ~(right | left)
    if right:
        out[:] = base + np.log(erfcx(alpha) - np.exp(d2) * erfcx(beta))
        return out
    out[left] = base + np.log(np.exp(d2[left]) * erfcx(-beta[left]) - erfcx(-alpha))
    out[mid] = base + alpha * alpha + np.log(erf(beta[mid]) - erf(alpha))
    return out


def _log_local_integral(a, b, window, nodes):
    eps, w = gauss_legendre(nodes, 0.0, window.eps_max)
    v = eps * window.s_max
    # inner s-integral in closed form, divided by its range so it tends to 1 as v -> 0
    inner = log_gaussian_segment(a, b, v) - np.log(v)
    return float(logsumexp(inner, b=w / window.eps_max))


def local_linear_statistic(sample, psf):
    """Standardised null statistic ``xi_n = sum(X_i) / (sigma sqrt(n))``."""
    sample = np.asarray(sample, dtype=float)
    if sample.size == 0:
        return 0.0
    return float(np.sum(sample) / (psf.sigma * math.sqrt(sample.size)))


def free_energy_local(sample, window, psf, quad=BAYES_QUADRATURE):
    """Free energy of the Gaussian local model in ``u = eps * s``.

    ``F_local = -log E_prior[exp(sqrt(n) xi_n u / sigma - n u^2 / (2 sigma^2))]``
    with ``xi_n`` from :func:`local_linear_statistic`.  The ``s`` integral
    is done in closed form, leaving a one-dimensional Gauss-Legendre integral
    over ``eps``.
    """
    sample = np.asarray(sample, dtype=float)
    n = sample.size
    if n == 0:
        return 0.0
    sigma = psf.sigma
    a = math.sqrt(n) * local_linear_statistic(sample, psf) / sigma
    b = n / (2.0 * sigma**2)
    levels = quad.levels()
    log_m = refine_until_converged(
        lambda k: _log_local_integral(a, b, window, levels[k]), quad, absolute=True, what="local free energy"
    )
    return -log_m


def singular_centering(n):
    """Leading singular term ``log(n)/2 - log(log(n))`` of aligned direct imaging."""
    if n < 3:
        raise DomainError("centering needs n >= 3")
    return 0.5 * math.log(n) - math.log(math.log(n))


def center_free_energy(f, n):
    return f - singular_centering(n)


def uncenter_free_energy(f_centered, n):
    return f_centered + singular_centering(n)


def quantile_summary(values, probs=(0.10, 0.50, 0.90)):
    """Empirical quantiles with linear interpolation between order statistics."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise EmptyInput("quantile summary of an empty sample")
    return tuple(float(q) for q in np.quantile(values, probs, method="linear"))


def free_energy_records(window, n_grid, psf, seed, replicates, quad=BAYES_QUADRATURE):
    """Exact and local free energies for every ``(n, replicate)`` pair.

    Replicate ``r`` uses one H0 sample of size ``max(n_grid)``; smaller sizes
    use its prefixes.  Rows are ordered by ``n`` then replicate, which does
    not depend on how the work is scheduled.
    """
    n_grid = sorted(int(n) for n in n_grid)
    if not n_grid or n_grid[0] < 3:
        raise DomainError("n grid must be nonempty with every n >= 3")
    if len(set(n_grid)) != len(n_grid):
        raise DomainError("n grid has duplicates")
    rows = {n: [] for n in n_grid}
    for r in range(int(replicates)):
        x = simulate_h0(n_grid[-1], psf, seed, r)
        exact = -_log_marginal_ratio_prefixes(x, window, psf, quad, n_grid)
        for n, f_exact in zip(n_grid, exact):
            f_local = free_energy_local(x[:n], window, psf, quad)
            shift = singular_centering(n)
            rows[n].append(
                FreeEnergyRecord(n, float(f_exact), f_local, float(f_exact) - shift, f_local - shift, r, int(seed))
            )
    return [rec for n in n_grid for rec in rows[n]]


def summarize_records(records):
    """Per-``n`` quantile bands of the centred exact and local free energies."""
    by_n = {}
    for rec in records:
        by_n.setdefault(rec.n, []).append(rec)
    out = []
    for n in sorted(by_n):
        group = by_n[n]
        ex = quantile_summary([r.centered_exact for r in group])
        lo = quantile_summary([r.centered_local for r in group])
        out.append({"n": n, "exact": ex, "local": lo, "replicates": len(group)})
    return out

"""Finite-n Neyman-Pearson power of misaligned binary SPADE and direct imaging.

Binary SPADE is handled exactly: the per-photon outcome is Bernoulli, the
count is binomial, and the most powerful level-alpha test is the randomised
one-sided binomial test.  Direct imaging uses the simple-vs-simple
likelihood-ratio statistic with a Monte Carlo critical value; null and
alternative replicates share their random numbers (one uniform and one
normal deviate per photon), and every replicate draws from its own stream
keyed by ``(seed, replicate)`` so results do not depend on scheduling.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, xlog1py, xlogy

from .errors import DomainError, InsufficientReplicates
from .information import binary_spade_shift
from .kernels import di_statistics

MIN_MC_REPS = 1000
_CHUNK = 1024
_UNIFORM_STREAM = 1
_NORMAL_STREAM = 2


@dataclass(frozen=True)
class BinarySpadeModel:
    """q=0 rates: null ``p0``, displaced source ``ps``, two-source ``p1 = p0 + delta``."""

    p0: float
    ps: float
    p1: float
    delta: float


@dataclass(frozen=True)
class RandomizedTest:
    """Randomised NP test on a binomial count ``K``.

    ``upper`` rejects ``K > k_star``, ``lower`` rejects ``K < k_star``, and at
    ``K == k_star`` rejects with probability ``gamma_r``.  ``degenerate``
    ignores the data and rejects with probability ``alpha``.
    """

    direction: str
    k_star: int
    gamma_r: float
    alpha: float
    n: int
    p0: float


@dataclass(frozen=True)
class PowerPoint:
    s: float
    n: int
    power: float
    std_err: float
    scheme: str


def binary_spade_model(scene, psf):
    p0, delta = binary_spade_shift(scene, psf)
    gamma = scene.gamma(psf)
    g = scene.g_s(psf)
    ps = math.exp(-((gamma - g) ** 2))
    return BinarySpadeModel(p0=p0, ps=ps, p1=p0 + delta, delta=delta)


def blind_spot_separation(theta):
    """Separation at which the displaced source's q=0 rate equals the bright one's."""
    return 2.0 * theta


def binomial_pmf(n, p):
    """Vector ``P(K = k)``, ``k = 0..n``, computed in log space."""
    k = np.arange(n + 1, dtype=float)
    log_pmf = gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0) + xlogy(k, p) + xlog1py(n - k, -p)
    return np.exp(log_pmf)


def _tail_above(pmf):
    # P(K > k) for each k, summed from the far tail inwards
    return np.concatenate([np.cumsum(pmf[::-1])[::-1][1:], [0.0]])


def _tail_below(pmf):
    # P(K < k) for each k
    return np.concatenate([[0.0], np.cumsum(pmf)[:-1]])


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")


def randomized_np_binomial(n, p0, p1, alpha):
    """Exact-size most powerful test of ``Bin(n, p0)`` against ``Bin(n, p1)``."""
    _check_alpha(alpha)
    n = int(n)
    if n < 1:
        raise DomainError("n must be >= 1")
    if not 0.0 < p0 < 1.0:
        raise DomainError("p0 must lie in (0, 1)")
    if not 0.0 <= p1 <= 1.0:
        raise DomainError("p1 must lie in [0, 1]")
    if p1 == p0:
        return RandomizedTest("degenerate", 0, alpha, alpha, n, p0)
    pmf = binomial_pmf(n, p0)
    if p1 > p0:
        tail = _tail_above(pmf)
        k_star = int(np.flatnonzero(tail <= alpha)[0])
        direction = "upper"
    else:
        tail = _tail_below(pmf)
        k_star = int(np.flatnonzero(tail <= alpha)[-1])
        direction = "lower"
    gamma_r = (alpha - tail[k_star]) / pmf[k_star]
    return RandomizedTest(direction, k_star, float(min(max(gamma_r, 0.0), 1.0)), alpha, n, p0)


def rejection_probabilities(test):
    """Per-count rejection probability ``phi(k)``, ``k = 0..n``."""
    phi = np.zeros(test.n + 1)
    if test.direction == "degenerate":
        phi[:] = test.alpha
    elif test.direction == "upper":
        phi[test.k_star + 1 :] = 1.0
        phi[test.k_star] = test.gamma_r
    else:
        phi[: test.k_star] = 1.0
        phi[test.k_star] = test.gamma_r
    return phi


def np_power_exact(test, n, p1):
    """Rejection probability of ``test`` when ``K ~ Bin(n, p1)``."""
    if int(n) != test.n:
        raise DomainError(f"test was built for n={test.n}, not n={n}")
    if test.direction == "degenerate":
        return test.alpha
    pmf = binomial_pmf(test.n, p1)
    if test.direction == "upper":
        strict = _tail_above(pmf)[test.k_star]
    else:
        strict = _tail_below(pmf)[test.k_star]
    return float(min(max(strict + test.gamma_r * pmf[test.k_star], 0.0), 1.0))


def bspade_power(scene, psf, n, alpha):
    """Exact finite-n power of misaligned binary SPADE at ``scene``."""
    model = binary_spade_model(scene, psf)
    test = randomized_np_binomial(n, model.p0, model.p1, alpha)
    return PowerPoint(scene.s, int(n), np_power_exact(test, n, model.p1), 0.0, "bSPADE")


def di_lrt_statistic(sample, scene, psf):
    """``sum log(p1(X_i) / p0(X_i))`` for image-plane positions (bright source at 0)."""
    x = np.asarray(sample, dtype=float)
    s, sigma = scene.s, psf.sigma
    terms = np.log1p(scene.epsilon * np.expm1((2.0 * x * s - s * s) / (2.0 * sigma**2)))
    return float(np.sum(terms))


def photon_deviates(seed, replicate, n):
    """Common random numbers of one replicate: ``(u, z)``, each of length ``n``.

    ``u`` assigns photons to the faint source (``u < eps``); ``z`` is the
    standard-normal position deviate.  Each comes from its own keyed stream,
    so the first ``n`` values do not depend on how many are drawn.
    """
    streams = []
    for tag in (_UNIFORM_STREAM, _NORMAL_STREAM):
        ss = np.random.SeedSequence(int(seed), spawn_key=(tag, int(replicate)))
        streams.append(np.random.Generator(np.random.PCG64(ss)))
    return streams[0].random(int(n)), streams[1].standard_normal(int(n))


def di_statistics_mc(epsilon, t_grid, n_grid, mc_reps, seed):
    """Null and CRN-alternative statistics for every replicate.

    ``t_grid`` holds separations in units of sigma.  Returns ``(T0, T1)`` of
    shape ``(mc_reps, len(n_grid), len(t_grid))``.
    """
    n_grid = np.asarray(n_grid, dtype=np.int64)
    n_max = int(n_grid[-1])
    T0 = np.empty((mc_reps, n_grid.size, len(t_grid)))
    T1 = np.empty_like(T0)
    for start in range(0, mc_reps, _CHUNK):
        stop = min(start + _CHUNK, mc_reps)
        u = np.empty((stop - start, n_max))
        z = np.empty_like(u)
        for i, rep in enumerate(range(start, stop)):
            u[i], z[i] = photon_deviates(seed, rep, n_max)
        T0[start:stop], T1[start:stop] = di_statistics(z, u, t_grid, epsilon, n_grid)
    return T0, T1


def empirical_randomized_power(null_stats, alt_stats, alpha):
    """Power of the test with an empirical, exactly-size-alpha critical value.

    The critical value ``c`` is the empirical ``1 - alpha`` quantile of the
    null statistics; ties at ``c`` are rejected with the probability that
    makes the empirical size exactly ``alpha``.  Returns ``(power, std_err)``.
    """
    _check_alpha(alpha)
    null_sorted = np.sort(np.asarray(null_stats, dtype=float))
    alt = np.asarray(alt_stats, dtype=float)
    m = null_sorted.size
    target = alpha * m
    c = null_sorted[m - 1 - int(math.floor(target))]
    n_gt = m - np.searchsorted(null_sorted, c, side="right")
    n_eq = m - np.searchsorted(null_sorted, c, side="left") - n_gt
    gamma_r = (target - n_gt) / n_eq
    power = (np.count_nonzero(alt > c) + gamma_r * np.count_nonzero(alt == c)) / alt.size
    power = min(max(float(power), 0.0), 1.0)
    return power, math.sqrt(power * (1.0 - power) / alt.size)


def di_power_table(epsilon, s_grid, n_grid, psf, alpha, mc_reps, seed):
    """CRN Monte Carlo power of direct imaging on an ``n x s`` grid.

    Every grid point is evaluated on the same deviate bank.  The detector
    offset plays no role: shifting all positions by a common amount leaves
    the statistic unchanged, so the computation is done in the bright
    source's frame.  Returns a list (over ``n``) of lists (over ``s``).
    """
    _check_alpha(alpha)
    if mc_reps < MIN_MC_REPS:
        raise InsufficientReplicates(f"mc_reps must be >= {MIN_MC_REPS}, got {mc_reps}")
    s_grid = [float(s) for s in s_grid]
    n_grid = [int(n) for n in n_grid]
    if not s_grid or not n_grid:
        raise DomainError("empty grid")
    if any(n < 1 for n in n_grid):
        raise DomainError("n must be >= 1")
    order = sorted(set(n_grid))
    t_grid = np.array(s_grid) / psf.sigma
    T0, T1 = di_statistics_mc(float(epsilon), t_grid, order, int(mc_reps), seed)
    table = []
    for n in n_grid:
        c = order.index(n)
        row = []
        for j, s in enumerate(s_grid):
            power, se = empirical_randomized_power(T0[:, c, j], T1[:, c, j], alpha)
            row.append(PowerPoint(s, n, power, se, "DI"))
        table.append(row)
    return table


def di_power_mc(scene, psf, n, alpha, mc_reps, seed):
    """Direct-imaging power at a single ``(s, n)`` point."""
    return di_power_table(scene.epsilon, [scene.s], [n], psf, alpha, mc_reps, seed)[0][0]


def power_curve(scheme, s_grid, n, scene, psf, alpha, mc_reps=20_000, seed=0):
    """Power versus separation at fixed ``n``; ``scene.s`` is ignored."""
    if scheme == "bSPADE":
        return [bspade_power(_with_s(scene, s), psf, n, alpha) for s in s_grid]
    if scheme == "DI":
        return di_power_table(scene.epsilon, s_grid, [n], psf, alpha, mc_reps, seed)[0]
    raise DomainError(f"unknown scheme {scheme!r}")


def power_vs_n(scheme, n_grid, s_values, scene, psf, alpha, mc_reps=20_000, seed=0):
    """Power versus sample size for each separation; ordered by ``s``, then ``n``."""
    if scheme == "bSPADE":
        return [bspade_power(_with_s(scene, s), psf, n, alpha) for s in s_values for n in n_grid]
    if scheme == "DI":
        table = di_power_table(scene.epsilon, s_values, n_grid, psf, alpha, mc_reps, seed)
        return [table[i][j] for j in range(len(s_values)) for i in range(len(n_grid))]
    raise DomainError(f"unknown scheme {scheme!r}")


def _with_s(scene, s):
    return type(scene)(scene.epsilon, float(s), scene.theta)

"""Finite-sample detection of a faint companion: direct imaging versus mode sorting.

Submodules: ``optics`` (PSF and mode statistics), ``information`` (KL
divergences), ``singular`` (zeta poles, local binary-SPADE statistics),
``bayes`` (free energies), ``testing`` (Neyman-Pearson power) and ``cli``.
"""
__version__ = "0.1.0"

from ._jit import BACKEND
from .bayes import (
    FreeEnergyRecord,
    PriorWindow,
    free_energy_exact,
    free_energy_local,
    free_energy_records,
    log_marginal_ratio,
    simulate_h0,
)
from .errors import (
    DegenerateCoefficient,
    DomainError,
    EmptyInput,
    InsufficientReplicates,
    IntegrationNotConverged,
)
from .information import (
    KlResult,
    kl_binary_spade_misaligned,
    kl_direct_imaging,
    kl_quantum,
    kl_spade_aligned,
)
from .optics import GaussianPsf, SceneParams
from .quadrature import QuadratureSpec
from .singular import (
    MonomialKl,
    PoleStructure,
    free_energy_asymptote,
    j_statistic,
    zeta_pole_structure,
)
from .testing import (
    PowerPoint,
    RandomizedTest,
    binary_spade_model,
    di_power_mc,
    np_power_exact,
    power_curve,
    power_vs_n,
    randomized_np_binomial,
)

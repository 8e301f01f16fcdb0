"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the requested quantity."""


class IntegrationNotConverged(ArithmeticError):
    """Successive quadrature refinements disagree by more than the tolerance."""


class DegenerateCoefficient(ArithmeticError):
    """A coefficient needed for a rescaling vanishes (numerically)."""


class InsufficientReplicates(ValueError):
    """Too few Monte Carlo replicates for a meaningful estimate."""


class EmptyInput(ValueError):
    """A summary statistic was requested for an empty collection."""

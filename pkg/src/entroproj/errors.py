"""Exception types shared across the package."""


class DomainBoundary(ValueError):
    """An argument lies outside the interior of a function's effective domain."""


class QuadratureDivergence(RuntimeError):
    """Adaptive quadrature hit its subdivision limit without meeting tolerance."""


class NonIntegrable(ValueError):
    """The integrand grows at least as fast as the reference density decays."""


class EstimateDisagreement(RuntimeError):
    """Two independent numerical estimates of the same quantity disagree."""

    def __init__(self, message, first, second):
        super().__init__(f"{message}: {first!r} vs {second!r}")
        self.first = first
        self.second = second


class NoAcceptedTrials(RuntimeError):
    """No Monte Carlo trial satisfied the conditioning event."""


class InvalidConfig(ValueError):
    """A configuration document failed validation."""

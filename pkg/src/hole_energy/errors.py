"""Exception hierarchy for the solvers and the command line front end.

The command line maps these onto distinct exit codes: configuration
problems exit 2, iterative-solver non-convergence exits 3, mathematical
domain violations exit 4, and Monte Carlo estimation failures exit 5.
"""


class HoleEnergyError(Exception):
    """Base class for all package errors."""


class ConfigError(HoleEnergyError):
    """Invalid run configuration (bad flags, malformed config file)."""


class DomainError(HoleEnergyError):
    """Input outside the mathematical domain of an operation."""


class RadiusTooLargeError(DomainError):
    """Hole or conversion radius too large for the chart."""


class NoFreeBoundaryError(DomainError):
    """The free-radius equation has no root inside the chart."""


class UnsupportedMetricError(DomainError):
    """Operation requires a metric shape this build does not handle."""


class NotLocalizedError(DomainError):
    """Field support violates a required localization constraint."""


class NotOmegaSubharmonicError(DomainError):
    """Recovered measure has negative density beyond tolerance."""


class InconsistentPairError(DomainError):
    """A potential/measure pair does not belong together."""


class InvalidInputError(DomainError):
    """Malformed numerical input (non-finite samples, bad grids)."""


class ConvergenceError(HoleEnergyError):
    """Iterative solver exceeded its iteration cap."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class ContourError(HoleEnergyError):
    """A zero-counting contour passes through a zero after all jitters."""


class EstimationError(HoleEnergyError):
    """Monte Carlo estimate could not be formed."""

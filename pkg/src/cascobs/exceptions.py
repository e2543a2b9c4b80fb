"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: scenario/configuration problems are
user-input errors (exit 2), design and solver infeasibilities are exit 3.
"""


class CascobsError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(CascobsError):
    """Matrix or grid dimensions are inconsistent with the operation."""


class NumericalError(CascobsError):
    """An iterative or series computation failed to converge, or produced
    non-finite values."""


class UnsolvableError(CascobsError):
    """A linear matrix equation has no (or no well-conditioned) solution."""


class DesignError(CascobsError):
    """The requested observer/regulator design is infeasible for the given
    system data (loss of observability, invalid pole set, ...)."""


class SpectralOverlapError(DesignError):
    """Two spectra that must be disjoint (nearly) intersect.

    Carries the offending eigenvalue so callers can shift their pole
    choices and retry.
    """

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class ConfigurationError(CascobsError):
    """A run configuration violates a scheme stability bound or another
    precondition checked before any stepping."""


class ScenarioError(CascobsError):
    """A scenario file is malformed or fails field-level validation."""


class FitError(CascobsError):
    """A decay-rate fit cannot be performed on the requested window."""

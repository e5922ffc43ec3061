"""Exception types shared across the package."""


class RotcapError(Exception):
    """Base class for all package-specific errors."""


class GridError(RotcapError):
    """Invalid grid construction or mismatched grids in an operation."""


class MultiplierError(RotcapError):
    """A Fourier multiplier is singular (or too close to it) on retained modes."""


class ProjectionError(RotcapError):
    """A field violates the structural assumption required by an operator.

    Raised e.g. when inverting a vertical derivative on a field whose
    vertical mean is not negligible.
    """


class VacuumError(RotcapError):
    """Density dropped below the configured floor during a simulation."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class CflError(RotcapError):
    """Requested time step violates the stability bound of the scheme."""


class SolverError(RotcapError):
    """An iterative solver failed to reach its tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SnapshotError(RotcapError):
    """Malformed, truncated or otherwise unusable snapshot file."""


class SeriesError(RotcapError):
    """Invalid time-series operation (non-monotone time, NaN values, ...)."""


class ConfigError(RotcapError):
    """Malformed configuration. Carries the dotted location of the offence."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location

"""Exception hierarchy shared across the package."""


class ThinspecError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(ThinspecError):
    """An argument is outside the range an operation supports."""


class GeometryError(ThinspecError):
    """The height profile or mesh is unusable (nonpositive height, rank loss)."""


class SolverError(ThinspecError):
    """An iterative solver failed to converge; carries a diagnostic trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []


class DegenerateEigenvalueError(ThinspecError):
    """Two eigenvalues coincide beyond the tolerance the method assumes."""


class BranchCrossingError(ThinspecError):
    """Eigenvector-overlap continuation lost the tracked eigenvalue branch."""


class ConfigError(ThinspecError):
    """An experiment configuration failed validation."""

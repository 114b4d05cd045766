"""Exception types shared across the package."""


class PTorsionError(Exception):
    """Base class for all package errors."""


class InvalidDomainError(PTorsionError, ValueError):
    """Domain description fails validation (bad parameters, self-intersection, ...)."""


class DegenerateGeometryError(PTorsionError, RuntimeError):
    """A geometric quantity could not be computed to tolerance (e.g. touching radius collapsed)."""


class QuadratureError(PTorsionError, RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class MeshError(PTorsionError, RuntimeError):
    """Mesh generation or validation failure."""


class MeshFormatError(PTorsionError, ValueError):
    """Mesh/solution file cannot be parsed; carries the offending location."""

    def __init__(self, message, path=None, line=None):
        loc = f"{path}:{line}: " if path is not None and line is not None else ""
        super().__init__(loc + message)
        self.path = path
        self.line = line


class SolverError(PTorsionError, RuntimeError):
    """Nonlinear solve failed (line search stagnation, max iterations, ...)."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


class NonDifferentiableError(SolverError):
    """Energy derivative requested at a point where it does not exist (eps=0, p<2, flat triangle)."""


class RecoveryError(PTorsionError, RuntimeError):
    """Derivative recovery failed (rank-deficient vertex patch)."""


class SolverFailureFlag(PTorsionError, RuntimeError):
    """A posteriori sanity check failed on a computed solution (sign of the normal derivative, maximum principle)."""

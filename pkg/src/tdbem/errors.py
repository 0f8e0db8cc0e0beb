"""Exception hierarchy shared across the package."""

__all__ = [
    "TdbemError",
    "ParseError",
    "NotClosed",
    "NotOrientable",
    "NotConnected",
    "DegenerateTriangle",
    "SingularGram",
    "QuadratureFailure",
    "InvalidTimestep",
    "DimensionMismatch",
    "SolverDiverged",
    "GmresStagnation",
    "EigFailure",
    "ConfigError",
]


class TdbemError(Exception):
    """Base class for all package errors."""


class ParseError(TdbemError):
    """Mesh file could not be parsed."""


class NotClosed(TdbemError):
    """Some edge does not have exactly two adjacent triangles."""


class NotOrientable(TdbemError):
    """Triangle windings do not induce a consistent orientation."""


class NotConnected(TdbemError):
    """The surface has more than one connected component."""


class DegenerateTriangle(TdbemError):
    """A triangle has (numerically) zero area."""


class SingularGram(TdbemError):
    """The mixed Gram matrix is numerically rank-deficient."""


class QuadratureFailure(TdbemError):
    """A quadrature routine produced non-finite values."""


class InvalidTimestep(TdbemError):
    """Non-positive or otherwise unusable timestep."""


class DimensionMismatch(TdbemError):
    """Operands assembled on incompatible meshes / sizes."""


class SolverDiverged(TdbemError):
    """An inner (projector) solve failed its residual tolerance."""


class GmresStagnation(TdbemError):
    """The iterative MOT solve did not reach tolerance within max iterations."""

    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


class EigFailure(TdbemError):
    """Dense eigensolver failed to converge."""


class ConfigError(TdbemError):
    """Invalid run configuration."""

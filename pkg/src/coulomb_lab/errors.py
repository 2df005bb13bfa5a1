"""Exception hierarchy shared by every module."""


class CoulombLabError(Exception):
    """Base class for all library errors."""


class Singular(CoulombLabError, ArithmeticError):
    """Kernel or energy evaluated at a coincidence (|x| = 0 or x_i = x_j)."""


class Unsupported(CoulombLabError, ValueError):
    """Dimension or potential kind outside the supported set."""


class OutOfDomain(CoulombLabError, ValueError):
    """Point lies outside the domain where a quantity is defined."""


class UnsupportedGeometry(CoulombLabError, ValueError):
    pass


class GeometryError(CoulombLabError, ValueError):
    """Test ball violates a geometric precondition."""


class NonConvergence(CoulombLabError, RuntimeError):
    """Iterative solver stopped before reaching its tolerance."""

    def __init__(self, message, residual=None, history=None):
        super().__init__(message)
        self.residual = residual
        self.history = history or []


class GridTooCoarse(CoulombLabError, RuntimeError):
    """Quadrature changed by more than the tolerance under refinement."""


class EnvelopeFailure(CoulombLabError, RuntimeError):
    pass


class DegenerateConfig(CoulombLabError, ValueError):
    pass


class SchemaError(CoulombLabError, ValueError):
    """Malformed JSON document (potential spec, experiment config)."""


class MissingArtifact(CoulombLabError, FileNotFoundError):
    """A required equilibrium artifact is absent."""


class EmptySampleSet(CoulombLabError, ValueError):
    """A sample file holds no configurations."""


class DimensionMismatch(CoulombLabError, ValueError):
    """Inputs of different spatial dimension were combined."""

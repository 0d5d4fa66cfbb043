"""Exception hierarchy shared by every module.

Validation problems derive from :class:`ValidationError` (a ``ValueError``)
and numerical breakdowns from :class:`NumericalFailure`. The CLI maps the
first family to exit code 1 and the second to exit code 2.
"""

__all__ = [
    "ArtifactError",
    "ValidationError",
    "NumericalFailure",
    "NonConvergent",
    "NoConvergence",
    "QuadratureError",
    "ErgodicityViolation",
    "EllipticityViolation",
    "ModulusViolation",
    "NonMonotoneDecomposition",
    "MaxIterExceeded",
    "StabilityViolation",
    "GridMismatch",
    "TableRangeExceeded",
    "ProvenanceError",
    "TruncationWarning",
]


class ArtifactError(Exception):
    """Base class for all package errors."""


class ValidationError(ArtifactError, ValueError):
    """Malformed input, configuration or precondition."""


class NumericalFailure(ArtifactError, ArithmeticError):
    """A computation ran but its result cannot be trusted."""


class NonConvergent(NumericalFailure):
    """A schedule of estimates failed to stabilise.

    Attributes
    ----------
    estimate : object
        The last available estimate, kept for diagnostics.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class NoConvergence(NonConvergent):
    """Extraction order schedule exhausted without meeting the tolerance."""


class QuadratureError(NumericalFailure):
    """A quadrature grid does not resolve its integrand."""


class ErgodicityViolation(NumericalFailure):
    """Resonant frequencies or a spatial/ensemble mean mismatch."""


class EllipticityViolation(NumericalFailure):
    """A sampled uniform-ellipticity margin fell below tolerance."""

    def __init__(self, message, margins=None):
        super().__init__(message)
        self.margins = margins


class ModulusViolation(NumericalFailure):
    """The declared modulus of continuity is exceeded."""

    def __init__(self, message, worst_ratio=None):
        super().__init__(message)
        self.worst_ratio = worst_ratio


class NonMonotoneDecomposition(NumericalFailure):
    """A coefficient matrix has no nonnegative stencil decomposition."""


class MaxIterExceeded(NumericalFailure):
    """Iteration budget exhausted; ``solution`` holds the best iterate."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class StabilityViolation(NumericalFailure):
    """Pseudo-time iteration stopped being nonexpansive in max-norm."""


class GridMismatch(ValidationError):
    """Two discrete solutions live on different grids."""


class TableRangeExceeded(NumericalFailure):
    """A tabulated effective operator was queried outside its lattice."""


class ProvenanceError(ValidationError):
    """A report cites a table whose residual exceeds the claimed tolerance."""


class TruncationWarning(UserWarning):
    """Boundary influence of a truncated corrector exceeds tolerance."""

"""Exception types shared by all modules."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class NumericError(ArithmeticError):
    """An iterative solve failed to converge.

    ``residual`` holds the last residual so callers can judge how close it got.
    """

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message if residual is None else f"{message} (residual {residual:.3e})")
        self.residual = residual


class GeometryError(ValueError):
    """A geometric construction is impossible, e.g. a root solve could not be bracketed."""


class BranchError(GeometryError):
    """Elliptic coordinates are ambiguous at the point (focal segment)."""


class DegenerateChartError(GeometryError):
    """Elliptic coordinates degenerate for a circle; polar coordinates must be used."""


class ConvexityError(GeometryError):
    """The boundary has a non-positive curvature sample."""


class StructuralError(RuntimeError):
    """A non-degeneracy matrix violates the expected block/order structure."""


class SingularityError(ArithmeticError):
    """A determinant leading coefficient vanishes, so the matrix is degenerate."""


class SearchError(RuntimeError):
    """A periodic-orbit search ended in a degenerate configuration."""

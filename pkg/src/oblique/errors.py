"""Exception hierarchy shared by all modules."""


class ObliqueError(Exception):
    """Base class for every error raised by this package."""


# geometry
class GeometryError(ObliqueError, ValueError):
    pass


class NonPositiveRadius(GeometryError):
    pass


class TooFewNodes(GeometryError):
    pass


class AngleOutOfRange(GeometryError):
    pass


class BadGrading(GeometryError):
    pass


class NonPositiveLength(GeometryError):
    pass


# special functions
class NonPositiveArgument(ObliqueError, ValueError):
    pass


class OrderTooLarge(ObliqueError, ValueError):
    pass


# layer operators
class NonNegativeLambda(ObliqueError, ValueError):
    pass


class MeshTooSmall(ObliqueError, ValueError):
    pass


class OutsideGap(ObliqueError, ValueError):
    pass


class PointTooCloseToCurve(ObliqueError, ValueError):
    pass


# spectral solver
class NotSymmetric(ObliqueError, ValueError):
    pass


class NonNegativeAlpha(ObliqueError, ValueError):
    pass


class NonNegativeBeta(ObliqueError, ValueError):
    pass


class SolverError(ObliqueError, RuntimeError):
    """A root find or eigen solve could not produce a certified answer."""


class BranchUnresolved(SolverError):
    pass


class BracketFailure(SolverError):
    pass


class NoBoundState(SolverError):
    pass


class GapEmpty(SolverError):
    pass


class NotConverged(SolverError):
    pass


# asymptotics / variational
class UnderResolved(ObliqueError, ValueError):
    pass


class OutOfRegime(ObliqueError, ValueError):
    pass


class OverlappingCharts(ObliqueError, ValueError):
    pass


class HypothesisViolated(ObliqueError, UserWarning):
    """Matched-grid eigenvalue bounds failed; issued as a warning, not raised."""


# cli
class ConfigInvalid(ObliqueError, ValueError):
    pass


class SolverFailed(ObliqueError, RuntimeError):
    """A run aborted by a numerical error; ``cause`` is the original exception."""

    def __init__(self, cause: Exception):
        super().__init__(f"{type(cause).__name__}: {cause}")
        self.cause = cause

"""Exception hierarchy shared by all modules."""


class AnosovError(Exception):
    """Base class for every error raised by the package."""


class TraceTooSmall(AnosovError, ValueError):
    """a + d + |b|(t - 1) <= 2: the eigen/cone formulas are invalid at this t."""


class NonFinite(AnosovError, ValueError):
    """A coordinate was NaN or infinite."""


class ParamDomain(AnosovError, ValueError):
    """A parameter lies outside the admissible domain."""


class RegionOverlap(AnosovError, ValueError):
    """The slow-down disk meets the twist strip or its own translates."""


class IntegrationFailure(AnosovError, RuntimeError):
    """Adaptive step control could not meet the requested tolerance."""


class NotInvertibleAt(AnosovError, ArithmeticError):
    """A derivative was singular at a sampled point."""

    def __init__(self, point, det):
        super().__init__(f"derivative singular at {tuple(point)} (det={det!r})")
        self.point = tuple(point)
        self.det = det


class NoConvergence(AnosovError, RuntimeError):
    """An iterative procedure did not reach its tolerance."""

    def __init__(self, message, last_delta=None):
        super().__init__(message)
        self.last_delta = last_delta


class TooManyPoints(AnosovError, ValueError):
    """Periodic-point enumeration would exceed the configured cap."""


class ContinuationLoss(AnosovError, RuntimeError):
    """Newton continuation lost a periodic point (diverged or collided)."""

    def __init__(self, point, step, reason=""):
        where = "" if point is None else f" {tuple(point)}"
        super().__init__(f"continuation lost point{where} at step {step}: {reason}")
        self.point = None if point is None else tuple(point)
        self.step = step


class IncompleteSet(AnosovError, ValueError):
    """A periodic orbit set does not have the Lefschetz count."""


class BudgetExceeded(AnosovError, RuntimeError):
    """Vertex or arclength budget exhausted during leaf tracing."""


class PartitionNotClosed(AnosovError, RuntimeError):
    """Traced leaves did not close up into rectangles."""


class DegenerateCell(AnosovError, RuntimeError):
    """A partition cell collapsed numerically."""


class Reducible(AnosovError, ValueError):
    """A transition matrix is not irreducible."""

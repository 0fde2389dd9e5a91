"""Exception hierarchy shared by every module of the package."""


class MetricFlowError(Exception):
    """Base class for all errors raised by metricflow."""


class SpaceMismatch(MetricFlowError, ValueError):
    """Two states from different spaces (or shapes) were compared."""


class HorizonExceeded(MetricFlowError, ValueError):
    """The requested evolution leaves the time interval [0, T]."""


class MeshTooCoarse(MetricFlowError, ValueError):
    """A step longer than the flow horizon delta was requested."""


class NotApplicable(MetricFlowError, ValueError):
    """The flow domain predicate failed on an intermediate state."""


class InvalidRange(MetricFlowError, ValueError):
    """Integration range outside [0, delta] or reversed."""


class NoConvergence(MetricFlowError, RuntimeError):
    """Dyadic refinement hit its level cap before meeting the tolerance."""


class SingularSystem(MetricFlowError, RuntimeError):
    """A resolvent linear solve failed."""


class NotInBody(MetricFlowError, ValueError):
    """A stop-problem state lies outside its convex constraint set."""


class DegeneratePair(MetricFlowError, ValueError):
    """A Lipschitz-ratio sample pair has zero distance."""


class TooFewPoints(MetricFlowError, ValueError):
    """Not enough strictly positive points for a log-log fit."""

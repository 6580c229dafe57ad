"""Exception hierarchy shared by all dcpl modules."""


class DCPLError(Exception):
    """Base class for all errors raised by dcpl."""


class RegionTooSmall(DCPLError):
    pass


class TopologyFailure(DCPLError):
    pass


class InfeasibleTriangle(DCPLError, ValueError):
    """Side lengths violate a strict triangle inequality (or are degenerate)."""


class InfeasibleScaleField(InfeasibleTriangle):
    """A scale field produces at least one infeasible rescaled triangle."""


class DegenerateEdge(DCPLError, ValueError):
    pass


class DegenerateTriangle(DCPLError, ValueError):
    pass


class NotAcute(DCPLError):
    pass


class SolverError(DCPLError):
    """Newton iteration failed; ``result`` holds the last iterate."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class LineSearchFailure(SolverError):
    pass


class MaxIterations(SolverError):
    pass


class OrientationFlip(DCPLError):
    pass


class OutsideSupport(DCPLError, ValueError):
    pass


class OutsideDomain(DCPLError, ValueError):
    pass


class UnknownMap(DCPLError, KeyError):
    pass


class InsufficientData(DCPLError, ValueError):
    pass


class ConfigError(DCPLError, ValueError):
    pass

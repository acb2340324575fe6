"""Exception types shared across the package."""


class HypergraphError(ValueError):
    pass


class VertexRangeError(HypergraphError):
    """An edge references a vertex outside ``0..n-1``."""


class MalformedEdgeError(HypergraphError):
    """An edge is empty, too large, or not strictly increasing."""


class ParseError(HypergraphError):
    pass


class EmptyHypergraphError(HypergraphError):
    """Regularity cannot be fitted to a hypergraph with no edges."""


class ZeroDegreeError(HypergraphError):
    """Some vertex has degree 0, so the minimum degree is useless as a scale."""


class UnknownEdgeError(HypergraphError):
    pass


class CodegreeCapError(HypergraphError, MemoryError):
    """Building a codegree table would exceed the configured memory cap."""

    def __init__(self, j, needed, cap):
        super().__init__(f"codegree table for j={j} needs {needed} entries, cap is {cap}")
        self.j = j
        self.needed = needed
        self.cap = cap


class InadmissibleNibbleError(ValueError):
    pass


class RetryExhausted(RuntimeError):
    """Strict mode ran out of attempts. ``best`` holds the least bad outcome."""

    def __init__(self, message, best=None, attempts=0):
        super().__init__(message)
        self.best = best
        self.attempts = attempts


class LedgerError(ValueError):
    pass


class ObservationViolation(AssertionError):
    def __init__(self, observation, t, j, margin, detail=""):
        msg = f"{observation} violated at t={t}, j={j} (margin {margin:.3e})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.observation = observation
        self.t = t
        self.j = j
        self.margin = margin


class InstanceError(ValueError):
    pass


class ExtractionError(ValueError):
    pass

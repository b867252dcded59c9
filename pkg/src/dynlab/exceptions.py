"""Exception types raised across dynlab."""


class DynlabError(Exception):
    pass


class DimensionMismatch(DynlabError, ValueError):
    """Raised when vector or matrix shapes disagree with a system's declared dimensions."""


class NonFiniteState(DynlabError, FloatingPointError):
    """A solver step produced NaN or Inf.

    Attributes
    ----------
    step : int
        Index of the first failing step (1-based; step ``n`` maps ``t_{n-1}`` to ``t_n``).
    time : float
        Time at which the non-finite state would have been recorded.
    trajectory : Trajectory or None
        Records accepted before the failure, when raised by ``integrate``.
    """

    trajectory = None

    def __init__(self, step, time, message=None):
        self.step = int(step)
        self.time = float(time)
        if message is None:
            message = f"non-finite state at step {self.step} (t={self.time:.6g})"
        super().__init__(message)


class ParseError(DynlabError, ValueError):
    """Malformed s-expression input. ``line`` and ``column`` are 1-based."""

    def __init__(self, message, line=1, column=1):
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})")


class ConfigError(DynlabError, ValueError):
    pass

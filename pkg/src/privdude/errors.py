"""Exception hierarchy shared across the package."""


class PrivDudeError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(PrivDudeError, ValueError):
    """A numeric parameter is outside its documented domain."""


class DimensionError(PrivDudeError, ValueError):
    """A vector has the wrong length.

    ``agent`` and ``constraint`` name the offending position when known.
    """

    def __init__(self, message, agent=None, constraint=None):
        super().__init__(message)
        self.agent = agent
        self.constraint = constraint


class StateError(PrivDudeError, RuntimeError):
    """An object was used in a state that forbids the call."""


class PreconditionError(PrivDudeError):
    """A program does not satisfy an algorithm's structural preconditions."""


class ScaleError(PrivDudeError):
    """An exhaustive computation would exceed its enumeration cap."""


class InfeasibleError(PrivDudeError):
    """An agent's personal feasible set is empty."""


class OracleError(PrivDudeError):
    """A best-response oracle failed during a solve.

    ``history`` holds the dual iterates recorded before the failure.
    """

    def __init__(self, message, agent=None, iteration=None, history=None):
        super().__init__(message)
        self.agent = agent
        self.iteration = iteration
        self.history = history


class InternalAssertionError(PrivDudeError, AssertionError):
    """An output failed a guarantee the algorithm is supposed to enforce."""

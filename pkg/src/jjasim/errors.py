"""Exception types shared across the package."""


class JJASimError(Exception):
    """Base class for all errors raised by jjasim."""


class ParameterError(JJASimError, ValueError):
    """Invalid physical or numerical input parameters."""


class DomainError(ParameterError):
    """An argument lies outside the domain of a formula."""


class DegenerateCouplingError(ParameterError):
    """The coupling capacitance vanishes, so the spin mapping is singular."""


class CapacityError(JJASimError, MemoryError):
    """A dense object would exceed the configured size cap."""


class ScheduleError(ParameterError):
    """A pulse schedule cannot be built or applied for the given chain."""


class ConvergenceError(JJASimError, RuntimeError):
    """An iterative solver failed to converge.

    Attributes carry enough context to diagnose the failure.
    """

    def __init__(self, message, iterations=None, last_delta=None):
        super().__init__(message)
        self.iterations = iterations
        self.last_delta = last_delta

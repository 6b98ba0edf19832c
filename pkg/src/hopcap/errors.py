"""Exception hierarchy shared by all modules."""


class HopcapError(Exception):
    """Base class for library errors."""


class DomainError(HopcapError, ValueError):
    """Argument outside the domain of a function."""


class PreconditionError(HopcapError, ValueError):
    """Caller-side contract violated (wrong shell, bad index, ...)."""


class NumericError(HopcapError, ArithmeticError):
    """A numerical procedure failed to reach its tolerance."""


class NoRootError(NumericError):
    """No sign change of the stationarity residual on the search bracket."""

    def __init__(self, msg, bracket):
        super().__init__(f"{msg} (bracket={bracket!r})")
        self.bracket = bracket


class NonConvergenceError(NumericError):
    def __init__(self, msg, trace=()):
        super().__init__(msg)
        self.trace = list(trace)


class DegenerateParametersError(NumericError):
    """Every evaluation of an objective was -inf or undefined."""


class WindowCollapsedError(HopcapError):
    """Fewer than three sign changes of Phi_0 in delta."""

    def __init__(self, msg, delta_at_min, phi_at_min, roots=()):
        super().__init__(msg)
        self.delta_at_min = delta_at_min
        self.phi_at_min = phi_at_min
        self.roots = tuple(roots)


class ResourceError(HopcapError, MemoryError):
    """Requested simulation exceeds the configured memory cap."""

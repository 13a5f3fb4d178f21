"""Exception hierarchy shared by all modules.

Two families matter to callers: `ValidationError` for bad input (the CLI maps
it to exit code 1) and `NumericalError` for tolerance or convergence failures
(exit code 2).
"""


class ValidationError(ValueError):
    """Invalid input. ``field`` names the offending entry when known."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class NumericalError(RuntimeError):
    """A numerical check failed or an algorithm did not converge."""

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = dict(details or {})


class PoleHitError(NumericalError):
    pass


class CountMismatchError(NumericalError):
    pass


class QuadratureError(NumericalError):
    pass


class AliasingError(NumericalError):
    pass


class IncompleteRootSetError(NumericalError):
    pass


class SingularSystemError(NumericalError):
    pass


class WindowViolationError(NumericalError):
    pass


class StabilityError(NumericalError):
    pass


class BranchError(NumericalError):
    pass

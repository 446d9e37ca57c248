"""Exception hierarchy shared by every module."""


class KahlerQCHError(Exception):
    """Base class for all package errors."""


class UsageError(KahlerQCHError, ValueError):
    """Bad arguments or an inconsistent request."""


class DomainError(KahlerQCHError, ArithmeticError):
    """Evaluation hit a singular point (division by zero, log of a non-positive number, a pole).

    ``node`` is the offending subexpression and ``index`` the flat index of the
    first bad sample, when known.
    """

    def __init__(self, message, node=None, index=None):
        self.node = node
        self.index = index
        if node is not None:
            text = str(node)
            if len(text) > 160:
                text = text[:157] + "..."
            message = f"{message} in `{text}`"
        if index is not None:
            message = f"{message} (sample {index})"
        super().__init__(message)


class UnsupportedOrderError(KahlerQCHError):
    """A grid-backed field was differentiated more often than its interpolant allows."""


class DegenerateCoframeError(DomainError):
    """The coframe coefficient matrix is singular somewhere on the domain."""


class NotClosedError(KahlerQCHError):
    """A 1-form offered to the potential builder is not closed."""

    def __init__(self, message, max_residual):
        self.max_residual = max_residual
        super().__init__(f"{message} (max residual {max_residual:.3e})")


class BuildRejected(KahlerQCHError):
    """A surface builder refused its input; carries the worst residual and where it occurred."""

    def __init__(self, message, max_residual=None, point=None):
        self.max_residual = max_residual
        self.point = point
        if max_residual is not None:
            message = f"{message} (max residual {max_residual:.3e}"
            if point is not None:
                message += " at " + ", ".join(f"{k}={v:.6g}" for k, v in point.items())
            message += ")"
        super().__init__(message)


class InfeasibleManufacturedSolution(BuildRejected):
    """The rearranged PDE gives h^2 <= 0 somewhere."""


class DivergenceError(KahlerQCHError):
    """Newton iteration did not reach the tolerance."""

    def __init__(self, message, history):
        self.history = list(history)
        super().__init__(message)


class SingularSystemError(KahlerQCHError):
    """The Newton Jacobian could not be factorized."""


class ConfigError(KahlerQCHError):
    """A run configuration could not be parsed or is missing a required entry."""

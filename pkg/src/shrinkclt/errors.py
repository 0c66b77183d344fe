"""Exception hierarchy shared by the library and the CLI exit codes."""


class ShrinkCltError(Exception):
    """Base class for all library errors."""


class QuadratureError(ShrinkCltError, ArithmeticError):
    """Numerical integration failed without evidence of divergence."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class MomentUndefinedError(ShrinkCltError, ValueError):
    """A requested moment is infinite or undefined for the marginal law."""


class DegenerateError(ShrinkCltError, ValueError):
    """The shrunken variable is almost surely constant."""


class UnsupportedDistributionError(ShrinkCltError, TypeError):
    """The distribution lacks the description needed for the computation."""


class BelowThresholdError(ShrinkCltError, ValueError):
    """Normalized partial sums at r = 0 do not exceed one, so no r(n) bracket exists."""


class ConvergenceError(ShrinkCltError, ArithmeticError):
    """An iterative solver hit its iteration cap."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history or []


class InapplicableError(ShrinkCltError, ValueError):
    """A check's hypotheses are not met by the process (e.g. rho*(1) = 1)."""


class AlphabetTooLargeError(ShrinkCltError, ValueError):
    """Exact event enumeration requested on too large an alphabet."""

"""Exception types raised across the package."""


class StochLBError(Exception):
    """Base class for all package errors."""


class DistributionError(StochLBError, ValueError):
    """Invalid distribution literal or parameter."""


class SupportCapError(StochLBError):
    """An exact computation would exceed the configured support/outcome cap.

    Callers should fall back to Monte Carlo.
    """


class ConvergenceError(StochLBError):
    """A root finder or search ran out of iterations."""


class InfeasibleError(StochLBError):
    """No feasible point exists (LP, bracket, GAP input)."""


class LimitError(StochLBError):
    """An internal iteration/round limit was hit."""

"""Exception types shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all toolkit-specific failures."""


class OutsideFredholmDomain(ToolkitError):
    """Requested a solve at E <= 0 where the linearization is not Fredholm."""


class NoConvergence(ToolkitError):
    """Iteration ran out of budget; carries the last iterate for inspection."""

    def __init__(self, message, *, iterate=None, residual_norm=None, iterations=None):
        super().__init__(message)
        self.iterate = iterate
        self.residual_norm = residual_norm
        self.iterations = iterations


class NearBifurcation(ToolkitError):
    """Fixed-E Jacobian is numerically singular; use the bordered solver."""


class NumericalFailure(ToolkitError):
    """Linear algebra broke down beyond the retry budget."""


class NoLinearBoundState(ToolkitError):
    """-Laplacian + V has no negative eigenvalue, so no small-amplitude branch."""


class StepUnderflow(ToolkitError):
    """Arclength step fell below ds_min."""


class StalledBranch(ToolkitError):
    """Continuation could not take a single step from the start point."""


class SwitchFailed(ToolkitError):
    """All branch-switch candidates collapsed back onto the parent branch."""


class InsufficientRange(ToolkitError):
    """Branch does not span the parameter range a diagnostic needs."""


class BlowUpDetected(ToolkitError):
    """Time integration produced non-finite values; carries last finite state."""

    def __init__(self, message, *, state=None, time=None):
        super().__init__(message)
        self.state = state
        self.time = time


class UnsupportedCriticalPoint(ToolkitError):
    """Degenerate critical point of V; Morse prediction not defined."""


class ConfigError(ToolkitError):
    """Run configuration failed validation."""

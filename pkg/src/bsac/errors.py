"""Error types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid parameter or configuration value."""


class ShapeError(ValueError):
    """Array length inconsistent with the mesh or operator dimension."""


class InputError(ValueError):
    """Malformed caller-supplied data (non-monotone times, missing fields)."""


class NumericalError(RuntimeError):
    """A solver failed to reach its tolerance; carries a residual report."""

    def __init__(self, message: str, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class StepFailure(Exception):
    """Internal signal: a time step could not be completed (caller halves dt)."""


class RunAbort(RuntimeError):
    """Time integration aborted; carries the partial trajectory record."""

    def __init__(self, message: str, partial_record=None):
        super().__init__(message)
        self.partial_record = partial_record

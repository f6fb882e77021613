"""Exception types shared across the package."""


class GridMismatchError(ValueError):
    """Operands live on different grids or have the wrong length."""


class SymmetryError(ValueError):
    """Coefficients are too far from Hermitian symmetry to represent a real field."""


class WindowError(ValueError):
    """A requested time window falls outside a trajectory or off its mesh."""


class UnsupportedProfileError(ValueError):
    """A closed-form code path was asked for a temporal profile it cannot handle."""


class ResolutionError(ValueError):
    """The grid cannot resolve the requested frequency range."""


class DivergenceError(RuntimeError):
    """Time stepping produced non-finite values."""

    def __init__(self, step: int, time: float):
        self.step = step
        self.time = time
        super().__init__(f"non-finite state at step {step} (t = {time:g})")


class NoConvergenceError(RuntimeError):
    """An iteration failed to converge; carries the partial report if available."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class ConfigError(ValueError):
    """Invalid run configuration; carries the offending field path."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")

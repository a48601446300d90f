"""Exception hierarchy shared across the toolkit.

Each class maps to one CLI exit code: ConfigError -> 1, IngestionError -> 2,
ModelViolationError -> 3, everything else derived from ToolkitError -> 4.
"""


class ToolkitError(Exception):
    """Base class for all toolkit failures."""


class ConfigError(ToolkitError):
    """Invalid or inconsistent configuration."""


class IngestionError(ToolkitError):
    """A file could not be parsed; carries the offending line when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.line = line


class ModelViolationError(ToolkitError):
    """A signal-model constraint failed; names where it first broke."""

    def __init__(self, message, t=None, harmonic=None):
        super().__init__(message)
        self.t = t
        self.harmonic = harmonic


class UnsupportedOrderError(ToolkitError):
    """A requested expansion order exceeds what the closed form supports."""


class StageError(ToolkitError):
    """Numerical failure inside a named pipeline stage."""

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class RidgeConfidenceError(StageError):
    """Ridge extraction fell below the confidence floor; carries the iteration."""

    def __init__(self, stage, message, iteration):
        super().__init__(stage, f"{message} (iteration {iteration})")
        self.iteration = iteration


class RankDeficiencyError(ToolkitError):
    """Least-squares system is rank deficient; carries the condition number."""

    def __init__(self, cond):
        super().__init__(f"design matrix is rank deficient (condition number {cond:.3e})")
        self.cond = cond

"""Exception types shared across the toolkit."""


class AnomkitError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(AnomkitError):
    """Input data violates the expected schema or an invariant."""


class ConfigError(AnomkitError):
    """A configuration value is missing, malformed, or infeasible."""


class FitError(AnomkitError):
    """A model could not be fitted on the given data."""


class ConvergenceError(FitError):
    """An iterative solver hit its iteration cap before reaching tolerance.

    The best iterate reached so far is attached as ``best`` so callers can
    inspect or keep it.
    """

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


class CalibrationError(AnomkitError):
    """An ensemble was used in the wrong calibration state."""


class IntegrityError(AnomkitError):
    """A serialized model failed its checksum or version check."""

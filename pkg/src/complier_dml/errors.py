"""Exception hierarchy.

The CLI maps the three top-level families onto stable exit codes:
``ConfigError`` -> 2, ``DataValidationError`` -> 3, ``EstimationError`` -> 4.
"""


class ComplierDMLError(Exception):
    """Base class for every error raised by this package."""

    kind = "error"

    def to_dict(self):
        return {"error": self.kind, "type": type(self).__name__, "message": str(self)}


class ConfigError(ComplierDMLError, ValueError):
    kind = "config"


class DataValidationError(ComplierDMLError, ValueError):
    kind = "data"


class SchemaError(DataValidationError):
    pass


class ParseError(DataValidationError):
    pass


class ShapeError(ComplierDMLError, ValueError):
    kind = "config"


class EstimationError(ComplierDMLError, RuntimeError):
    kind = "estimation"


class WeakFirstStageError(EstimationError):
    """Instrument-contrast in the treatment is numerically zero (no complier mass)."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class SingularJacobianError(EstimationError):
    pass


class DegenerateLabelError(EstimationError):
    pass


class DegenerateWeightsError(EstimationError):
    pass

"""Exception types.  Every error carries a short machine-readable ``code``."""


class SoilPHError(Exception):
    code = "error"

    def __init__(self, message="", code=None):
        if code is not None:
            self.code = code
        super().__init__(message or self.code)


class SchemaError(SoilPHError):
    """Input columns or feature layout do not match what is required."""

    code = "schema"


class DataError(SoilPHError):
    """Input data is unusable (empty, degenerate, out of range)."""

    code = "data"


class ConfigError(SoilPHError):
    code = "config"


class ModelFormatError(SoilPHError):
    code = "model_format"

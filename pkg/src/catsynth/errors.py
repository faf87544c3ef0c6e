class CatSynthError(Exception):
    """Base class for all package errors."""

    exit_code = 4


class ConfigError(CatSynthError, ValueError):
    """Invalid configuration. ``path`` names the offending field, e.g. ``features[3].cardinality``."""

    exit_code = 2

    def __init__(self, message, path=None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class GenerationError(CatSynthError, ArithmeticError):
    exit_code = 4


class UsageError(CatSynthError, ValueError):
    exit_code = 2

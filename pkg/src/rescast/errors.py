"""Exception hierarchy.

Every error carries the process exit code the CLI maps it to.
"""


class RescastError(Exception):
    exit_code = 1


class ConfigError(RescastError, ValueError):
    exit_code = 1


class DataError(RescastError, ValueError):
    exit_code = 2


class SchemaError(DataError):
    """A required CSV column is absent."""

    def __init__(self, column):
        super().__init__(f"missing required column {column!r}")
        self.column = column


class RowError(DataError):
    """A CSV row could not be parsed."""

    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class EmptySeriesError(DataError):
    pass


class DegenerateRangeError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class FetchError(DataError):
    def __init__(self, message, cache_path=None):
        super().__init__(message)
        self.cache_path = cache_path


class HTTPStatusError(FetchError):
    def __init__(self, status, body_excerpt, cache_path=None):
        super().__init__(f"HTTP {status}: {body_excerpt}", cache_path)
        self.status = status
        self.body_excerpt = body_excerpt


class ArtifactError(RescastError):
    exit_code = 3


class ModelError(RescastError):
    exit_code = 1


class NotFittedError(ModelError):
    pass


class InputError(ModelError, ValueError):
    pass


class DegenerateReservoirError(ModelError):
    pass


class UnderdeterminedError(ModelError):
    pass


class DegenerateTestError(RescastError, ValueError):
    pass


class DivergenceError(ModelError):
    exit_code = 4

    def __init__(self, message, model_name=None):
        super().__init__(message)
        self.model_name = model_name

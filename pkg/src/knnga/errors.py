"""Exception hierarchy.

``DataError`` subclasses signal bad input data (CLI exit code 3),
``ConfigError`` signals a bad experiment or run configuration (exit code 2).
"""


class KnngaError(Exception):
    """Base class for all package errors."""


class DataError(KnngaError, ValueError):
    """Input data cannot be parsed or violates a dataset invariant."""


class ConfigError(KnngaError, ValueError):
    """An experiment spec or configuration value is invalid."""


class DataSyntaxError(DataError):
    """Malformed ARFF/CSV text, positioned by 1-based line number."""

    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class SchemaError(DataError):
    def __init__(self, reason: str, line: int | None = None):
        self.line = line
        self.reason = reason
        super().__init__(reason if line is None else f"line {line}: {reason}")


class ClassError(SchemaError):
    """Class attribute is missing, numeric, or has a missing cell."""


class HeaderMismatch(DataError):
    pass


class SchemaMismatch(DataError):
    """A model or row was used with a dataset of a different schema."""


class InvalidFoldCount(ConfigError):
    pass


class MaskLengthError(ConfigError):
    pass


class EmptyMaskError(ConfigError):
    pass


class KTooLarge(ConfigError):
    pass


class EmptyTrainingSet(DataError):
    pass


class EmptyPopulation(ConfigError):
    pass


class LengthMismatch(KnngaError, ValueError):
    pass


class EmptyInput(KnngaError, ValueError):
    pass


class FitnessError(KnngaError, RuntimeError):
    """The fitness function raised; carries the offending chromosome."""

    def __init__(self, chromosome, cause: BaseException):
        self.chromosome = chromosome
        super().__init__(f"fitness evaluation failed for chromosome {chromosome}: {cause!r}")


class StageError(KnngaError):
    """Wraps a failure inside the experiment pipeline with the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")

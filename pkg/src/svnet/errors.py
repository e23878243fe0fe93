"""Exception hierarchy shared by every stage of the pipeline."""


class SvnetError(Exception):
    """Base class for all errors raised by svnet."""


class ParseError(SvnetError):
    """A malformed row in an input file."""

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")


class RangeError(SvnetError):
    """A day or window outside the observation calendar."""


class MissingWindowError(SvnetError):
    pass


class ConfigurationError(SvnetError):
    pass


class DomainError(SvnetError):
    """Arguments outside the mathematical domain of an operation."""


class EmptyInputError(SvnetError):
    pass


class LimitError(SvnetError):
    """Input too large for an exhaustive routine."""


class StageError(SvnetError):
    """Failure of one pipeline stage; carries the stage name and cause."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")


class UsageError(SvnetError):
    """Bad command-line or format argument."""

"""Exception types shared across the package."""


class PidnetError(Exception):
    """Base class for all errors raised by pidnet."""


class ShapeError(PidnetError, ValueError):
    """Array dimensions do not conform."""


class ParameterError(PidnetError, ValueError):
    """An argument lies outside its valid range."""


class StateError(PidnetError, RuntimeError):
    """An operation was called before its required state exists."""


class ParseError(PidnetError, ValueError):
    """A text record could not be parsed.

    ``line`` and ``field`` are 1-based positions when known.
    """

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


class SchemaError(ParseError):
    """A record parsed but violates the expected schema."""


class TrainingError(PidnetError, ArithmeticError):
    """Training produced non-finite parameters or losses."""

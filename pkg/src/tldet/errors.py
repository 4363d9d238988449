"""Exception hierarchy shared by all tldet modules."""


class TldetError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(TldetError):
    """Invalid input: violated precondition, bad value, infeasible request."""


class ParseError(ValidationError):
    """Malformed text input; carries file and line context when known."""

    def __init__(self, message, path=None, line=None):
        ctx = ""
        if path is not None:
            ctx = f"{path}:" if line is None else f"{path}:{line}:"
        super().__init__(f"{ctx} {message}".strip())
        self.path = path
        self.line = line


class FormatError(ValidationError):
    """Unsupported or corrupt binary format (images, parameter blobs)."""


class NumericError(TldetError):
    """Non-finite values or insufficient numeric resolution."""


class ContractError(TldetError):
    """API misuse, e.g. a backward pass fed a mismatched forward cache."""

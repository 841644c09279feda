"""Exception types shared across the package."""


class NestInstError(Exception):
    """Base class for all errors raised by nestinst."""


class SortError(NestInstError, ValueError):
    """Ill-sorted term, literal or substitution."""


class FragmentViolation(NestInstError):
    """A clause or literal lies outside the fragment a procedure accepts."""

    def __init__(self, message, literal=None):
        super().__init__(message if literal is None else f"{message}: {literal}")
        self.literal = literal


class Unsupported(NestInstError):
    """Input is syntactically valid but uses a construct we do not handle."""


class ResourceLimit(NestInstError):
    """A configured cap (predicate count, search nodes, ...) was exceeded."""


class ContractError(NestInstError):
    """A sub-procedure returned something violating its interface contract."""


class ConfigurationError(NestInstError):
    """Inconsistent theory stack or procedure configuration."""


class ParseError(NestInstError):
    def __init__(self, message, line=None, column=None):
        where = f"{line}:{column}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line
        self.column = column

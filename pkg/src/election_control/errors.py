"""Exception hierarchy shared by all modules."""


class ElectionControlError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(ElectionControlError, ValueError):
    """An input violates a documented invariant."""


class ParseError(ValidationError):
    """A text input could not be parsed.

    ``line`` is the 1-based line number of the offending line.
    """

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class DuplicateEdgeError(ParseError):
    """The same directed edge appears twice in an edge list."""


class EnumerationLimitError(ElectionControlError):
    """An exhaustive enumeration would exceed its configured cap."""

    def __init__(self, required: int, cap: int):
        self.required = required
        self.cap = cap
        super().__init__(
            f"exhaustive enumeration needs {required} evaluations, cap is {cap}"
        )

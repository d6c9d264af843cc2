"""Exception types shared across the package.

The CLI maps these onto process exit codes: unreadable or malformed
input files give 2, parameters outside their documented domain give 3,
and a violated internal invariant gives 4.
"""


class InvalidArgumentError(ValueError):
    """A parameter value is outside its documented domain."""


class InputFormatError(ValueError):
    """An input file could not be parsed.

    Carries the offending path and, when known, the 1-based line number
    so the message can point at the exact row.
    """

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}: " if line is None else f"{path}:{line}: "
        super().__init__(prefix + message)


class InternalCheckError(RuntimeError):
    """An internal consistency check failed; indicates a bug, not bad input."""

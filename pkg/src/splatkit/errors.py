"""Exception types shared across the package.

Callers that need exit-code semantics (the CLI) map these onto process
exit codes; library users catch them like any ValueError.
"""


class SplatkitError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(SplatkitError, ValueError):
    """A scalar parameter is out of its documented range."""


class ShapeError(SplatkitError, ValueError):
    """Input rasters do not agree in their spatial/channel dimensions."""


class DegenerateInputError(SplatkitError, ValueError):
    """Input is structurally valid but too small or empty to operate on."""


class ValidationError(SplatkitError, ValueError):
    """A constructed object violates its invariants (e.g. a rotation that
    cannot be orthonormalized)."""


class ParseError(SplatkitError, ValueError):
    """A file or text stream does not conform to its format.

    Carries the offending location: ``offset`` is a byte offset for binary
    formats, ``line`` a 1-based line number for text formats.
    """

    def __init__(self, message, *, offset=None, line=None):
        loc = ""
        if offset is not None:
            loc = f" (byte offset {offset})"
        elif line is not None:
            loc = f" (line {line})"
        super().__init__(message + loc)
        self.offset = offset
        self.line = line

"""Exception types shared across the package.

Two families: ValidationError for bad arguments / inconsistent inputs, and
FormatError (with named subclasses) for malformed files.  The CLI maps these
to distinct exit codes.
"""


class ValidationError(ValueError):
    """An argument violates a documented precondition."""


class EmptySequenceError(ValidationError):
    """A pooling input has no usable (non-special) positions."""


class FormatError(Exception):
    """Base class for on-disk format violations."""


class BadMagicError(FormatError):
    """File does not start with the expected magic bytes."""


class UnsupportedVersionError(FormatError):
    """File declares a version this reader does not understand."""


class TruncatedFileError(FormatError):
    """File ends before the declared payload is complete."""


class SizeMismatchError(FormatError):
    """Declared sizes do not match the payload actually present."""

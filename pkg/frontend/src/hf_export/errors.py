"""Exception types shared across the package.

ValidationError covers bad arguments and checkpoints that cannot satisfy a
documented precondition; FormatError covers malformed input files.  The CLI
maps these to distinct exit codes.
"""


class ValidationError(ValueError):
    """An argument or checkpoint violates a documented precondition."""


class MissingHeadError(ValidationError):
    """The checkpoint has no masked-LM head to export."""


class FormatError(Exception):
    """An input file is malformed."""

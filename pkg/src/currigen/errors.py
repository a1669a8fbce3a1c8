"""Exception hierarchy shared across the package.

Errors are grouped into four operator-facing classes (validation, io,
backend, parse); the CLI and service map each class to a distinct exit
code / HTTP status.
"""


class CurrigenError(Exception):
    """Base class for all package errors."""

    #: operator-facing class: "validation" | "io" | "backend" | "parse"
    kind = "validation"


class ValidationError(CurrigenError):
    """Bad configuration or arguments, detected before any backend call."""

    kind = "validation"


class DatasetError(CurrigenError):
    """Malformed pool file or schema violation."""

    kind = "io"


class QuotaError(ValidationError):
    """Stratified sampling quota exceeds availability for a subject."""


class StorageError(CurrigenError):
    """I/O failure reading or writing an artifact; carries the path."""

    kind = "io"

    def __init__(self, path, message):
        super().__init__(f"{message}: {path}")
        self.path = str(path)


class CheckpointError(CurrigenError):
    """Missing or corrupt checkpoint directory."""

    kind = "io"


class BackendError(CurrigenError):
    """Transport-level failure talking to an agent or student backend."""

    kind = "backend"


class ParseError(CurrigenError):
    """Reply text does not satisfy the strict output contract."""

    kind = "parse"

    def __init__(self, message, last_reply=None):
        super().__init__(message)
        self.last_reply = last_reply


class RangeError(ParseError):
    """Parsed value falls outside its legal range."""


class TaggingError(ParseError):
    """Difficulty / subject tagging failed after all retries."""


class GenerationError(ParseError):
    """Variant generation failed after all retries."""


class SolveError(ParseError):
    """Solver produced no usable solution."""


class VerifyError(ParseError):
    """Verifier reply unparseable after all retries."""

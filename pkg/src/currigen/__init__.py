"""Closed-loop curriculum generation for math reasoning models.

The core loop: evaluate a student on a validation pool, split it into hard
and easy halves, synthesize remedial variants below the hard problems and
advanced variants above the easy ones, filter the candidates, then move the
stubborn problems into training and the fresh ones into validation. A
companion numerical simulator checks the pacing claims that motivate the
bidirectional policy.
"""

__version__ = "0.1.0"

from currigen.dataset import (  # noqa: F401
    Problem,
    ProblemPool,
    Provenance,
    ProvenanceKind,
    SubjectCategory,
)
from currigen.errors import (  # noqa: F401
    BackendError,
    CheckpointError,
    CurrigenError,
    DatasetError,
    ParseError,
    QuotaError,
    StorageError,
    ValidationError,
)

__all__ = [
    "__version__",
    "Problem",
    "ProblemPool",
    "Provenance",
    "ProvenanceKind",
    "SubjectCategory",
    "BackendError",
    "CheckpointError",
    "CurrigenError",
    "DatasetError",
    "ParseError",
    "QuotaError",
    "StorageError",
    "ValidationError",
]

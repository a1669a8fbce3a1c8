"""Problem data model, JSONL persistence, stratified seed sampling, histograms.

One JSON object per line, canonical form (sorted keys, compact separators,
UTF-8, no ASCII escaping) so that checkpoints are byte-stable and diffable.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .errors import DatasetError, QuotaError, StorageError

MIN_LEVEL = 1
MAX_LEVEL = 10


class SubjectCategory(Enum):
    """The seven mathematical disciplines a problem can be filed under."""

    PREALGEBRA = "Prealgebra"
    ALGEBRA = "Algebra"
    INTERMEDIATE_ALGEBRA = "Intermediate Algebra"
    GEOMETRY = "Geometry"
    NUMBER_THEORY = "Number Theory"
    COUNTING_PROBABILITY = "Counting & Probability"
    PRECALCULUS = "Precalculus"

    @classmethod
    def parse(cls, label: str) -> "SubjectCategory":
        for member in cls:
            if member.value == label:
                return member
        raise DatasetError(f"unknown subject category: {label!r}")


#: Default per-subject quota for the 200-problem seed pool.
SEED_QUOTA_DEFAULT: dict[SubjectCategory, int] = {
    SubjectCategory.PREALGEBRA: 51,
    SubjectCategory.ALGEBRA: 26,
    SubjectCategory.INTERMEDIATE_ALGEBRA: 22,
    SubjectCategory.GEOMETRY: 21,
    SubjectCategory.NUMBER_THEORY: 21,
    SubjectCategory.COUNTING_PROBABILITY: 29,
    SubjectCategory.PRECALCULUS: 30,
}


def validate_level(level: int) -> int:
    """Check a difficulty level lies on the 1..10 scale."""
    if not isinstance(level, int) or isinstance(level, bool):
        raise DatasetError(f"level must be an integer, got {level!r}")
    if not MIN_LEVEL <= level <= MAX_LEVEL:
        raise DatasetError(f"level out of range [{MIN_LEVEL},{MAX_LEVEL}]: {level}")
    return level


class ProvenanceKind(Enum):
    SEED = "seed"
    REDUCED = "reduced"
    REVERSED = "reversed"
    INCREASED = "increased"
    DIVERSIFIED = "diversified"


#: Kinds produced by the downward (remedial) trajectory.
REMEDY_KINDS = frozenset({ProvenanceKind.REDUCED, ProvenanceKind.REVERSED})
#: Kinds produced by the upward (expansion) trajectory.
ADVANCE_KINDS = frozenset({ProvenanceKind.INCREASED, ProvenanceKind.DIVERSIFIED})


@dataclass(frozen=True)
class Provenance:
    kind: ProvenanceKind
    parent_id: str | None = None
    round_created: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.round_created, int) or self.round_created < 0:
            raise DatasetError(f"round_created must be a non-negative integer, got {self.round_created!r}")
        if self.kind is ProvenanceKind.SEED:
            if self.parent_id is not None:
                raise DatasetError("seed provenance cannot carry a parent_id")
            if self.round_created != 0:
                raise DatasetError("seed provenance must have round_created = 0")
        elif self.parent_id is None:
            raise DatasetError(f"{self.kind.value} provenance requires a parent_id")


@dataclass(frozen=True)
class Problem:
    """One math instance: query text, optional reference solution and tags."""

    id: str
    query: str
    answer: str | None = None
    level: int | None = None
    subject: SubjectCategory | None = None
    err_count: int = 0
    provenance: Provenance = field(default_factory=lambda: Provenance(ProvenanceKind.SEED))

    def __post_init__(self) -> None:
        if not self.id:
            raise DatasetError("problem id must be non-empty")
        if self.level is not None:
            validate_level(self.level)
        if not isinstance(self.err_count, int) or isinstance(self.err_count, bool) or self.err_count < 0:
            raise DatasetError(f"err_count must be a non-negative integer, got {self.err_count!r}")

    @property
    def is_tagged(self) -> bool:
        """True when the problem can enter a training or validation pool."""
        return self.level is not None and self.subject is not None and bool(self.answer)

    def with_err_count(self, err_count: int) -> "Problem":
        if err_count < self.err_count:
            raise DatasetError(f"err_count may not decrease ({self.err_count} -> {err_count}) for {self.id}")
        return replace(self, err_count=err_count)


class ProblemPool:
    """Ordered, duplicate-free collection of problems."""

    def __init__(self, name: str = "pool", problems: Iterable[Problem] = ()) -> None:
        self.name = name
        self._by_id: dict[str, Problem] = {}
        for problem in problems:
            if problem.id in self._by_id:
                raise DatasetError(f"duplicate problem id: {problem.id}")
            self._by_id[problem.id] = problem

    def __iter__(self) -> Iterator[Problem]:
        return iter(self._by_id.values())

    def __len__(self) -> int:
        return len(self._by_id)

    def __contains__(self, problem_id: str) -> bool:
        return problem_id in self._by_id

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ProblemPool):
            return NotImplemented
        return list(self) == list(other)

    def add(self, problem: Problem) -> None:
        if problem.id in self._by_id:
            raise DatasetError(f"duplicate problem id: {problem.id}")
        self._by_id[problem.id] = problem

    def replace(self, problem: Problem) -> None:
        if problem.id not in self._by_id:
            raise DatasetError(
                f"cannot replace unknown id {problem.id!r} in pool {self.name!r}"
            )
        self._by_id[problem.id] = problem

    def get(self, problem_id: str) -> Problem:
        try:
            return self._by_id[problem_id]
        except KeyError:
            raise DatasetError(f"no problem with id {problem_id!r} in pool {self.name!r}") from None

    def ids(self) -> list[str]:
        return list(self._by_id)

    def require_tagged(self) -> None:
        """Raise unless every problem has level, subject, and answer."""
        missing = [p.id for p in self if not p.is_tagged]
        if missing:
            raise DatasetError(
                f"pool {self.name!r} has {len(missing)} problem(s) without level/subject/answer: "
                + ", ".join(missing[:5])
                + ("..." if len(missing) > 5 else "")
            )


def problem_to_record(problem: Problem) -> dict:
    return {
        "id": problem.id,
        "query": problem.query,
        "answer": problem.answer,
        "level": problem.level,
        "subject": problem.subject.value if problem.subject else None,
        "err_count": problem.err_count,
        "provenance": {
            "kind": problem.provenance.kind.value,
            "parent_id": problem.provenance.parent_id,
            "round_created": problem.provenance.round_created,
        },
    }


_REQUIRED_KEYS = {"id", "query", "answer", "level", "subject", "err_count", "provenance"}
_PROVENANCE_KEYS = {"kind", "parent_id", "round_created"}


def record_to_problem(record: dict) -> Problem:
    if not isinstance(record, dict):
        raise DatasetError(f"expected a JSON object, got {type(record).__name__}")
    missing = _REQUIRED_KEYS - record.keys()
    if missing:
        raise DatasetError(f"missing field(s): {', '.join(sorted(missing))}")
    extra = record.keys() - _REQUIRED_KEYS
    if extra:
        raise DatasetError(f"unknown field(s): {', '.join(sorted(extra))}")
    prov_rec = record["provenance"]
    if not isinstance(prov_rec, dict) or prov_rec.keys() != _PROVENANCE_KEYS:
        raise DatasetError("provenance must be an object with kind, parent_id, round_created")
    try:
        kind = ProvenanceKind(prov_rec["kind"])
    except ValueError:
        raise DatasetError(f"unknown provenance kind: {prov_rec['kind']!r}") from None
    level = record["level"]
    if level is not None and (not isinstance(level, int) or isinstance(level, bool) or not MIN_LEVEL <= level <= MAX_LEVEL):
        raise DatasetError(f"level out of range [{MIN_LEVEL},{MAX_LEVEL}]")
    subject = SubjectCategory.parse(record["subject"]) if record["subject"] is not None else None
    return Problem(
        id=record["id"],
        query=record["query"],
        answer=record["answer"],
        level=level,
        subject=subject,
        err_count=record["err_count"],
        provenance=Provenance(kind, prov_rec["parent_id"], prov_rec["round_created"]),
    )


def dump_record(record: dict) -> str:
    """Canonical single-line JSON: sorted keys, compact, no ASCII escaping."""
    return json.dumps(record, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def pool_to_jsonl(pool: ProblemPool) -> str:
    return "".join(dump_record(problem_to_record(p)) + "\n" for p in pool)


def load_pool(path: str | Path, name: str | None = None) -> ProblemPool:
    """Read a JSONL pool file, preserving line order.

    Errors carry the 1-based line number of the offending record.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise StorageError(path, f"cannot read pool ({exc.__class__.__name__})") from exc
    problems: list[Problem] = []
    seen: set[str] = set()
    # split on \n only: queries may legally contain U+2028 and friends,
    # which str.splitlines would treat as record boundaries
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            raise DatasetError(f"blank line at line {lineno} in {path}")
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"malformed JSON at line {lineno} in {path}: {exc.msg}") from exc
        try:
            problem = record_to_problem(record)
        except DatasetError as exc:
            raise DatasetError(f"{exc} at line {lineno} in {path}") from None
        if problem.id in seen:
            raise DatasetError(f"duplicate problem id {problem.id!r} at line {lineno} in {path}")
        seen.add(problem.id)
        problems.append(problem)
    return ProblemPool(name or path.stem, problems)


def save_pool(pool: ProblemPool, path: str | Path) -> None:
    """Write the pool in canonical JSONL form; parent directory must exist."""
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(pool_to_jsonl(pool))
    except OSError as exc:
        raise StorageError(path, f"cannot write pool ({exc.__class__.__name__})") from exc


def stratified_seed_sample(
    pool: ProblemPool,
    quota: Mapping[SubjectCategory, int],
    rng_seed: int,
    name: str = "seed",
) -> ProblemPool:
    """Draw quota[subject] problems per subject, without replacement.

    Each subject gets an independent shuffle seeded from (rng_seed, subject),
    so the draw for one subject never perturbs another's. Within a subject
    the selected problems keep their original pool order.
    """
    by_subject: dict[SubjectCategory, list[Problem]] = {s: [] for s in SubjectCategory}
    for problem in pool:
        if problem.subject is None:
            raise DatasetError(f"problem {problem.id!r} has no subject tag; tag the pool before sampling")
        by_subject[problem.subject].append(problem)

    selected: list[Problem] = []
    for subject in SubjectCategory:
        want = int(quota.get(subject, 0))
        if want < 0:
            raise QuotaError(f"negative quota for {subject.value}")
        available = by_subject[subject]
        if want > len(available):
            raise QuotaError(
                f"quota for {subject.value} is {want} but only {len(available)} available "
                f"(short by {want - len(available)})"
            )
        if want == 0:
            continue
        rng = random.Random(f"{rng_seed}:{subject.value}")
        indices = list(range(len(available)))
        rng.shuffle(indices)
        chosen = sorted(indices[:want])
        selected.extend(available[i] for i in chosen)
    return ProblemPool(name, selected)


@dataclass(frozen=True)
class DistributionReport:
    """Per-subject and per-level histogram of a pool."""

    total: int
    subjects: dict[str, int]
    levels: dict[str, int]

    def to_dict(self) -> dict:
        return {"total": self.total, "subjects": dict(self.subjects), "levels": dict(self.levels)}


def distribution_report(pool: ProblemPool) -> DistributionReport:
    subjects = {s.value: 0 for s in SubjectCategory}
    subjects["untagged"] = 0
    levels = {str(k): 0 for k in range(MIN_LEVEL, MAX_LEVEL + 1)}
    levels["untagged"] = 0
    for problem in pool:
        subjects[problem.subject.value if problem.subject else "untagged"] += 1
        levels[str(problem.level) if problem.level is not None else "untagged"] += 1
    return DistributionReport(total=len(pool), subjects=subjects, levels=levels)

"""Bidirectional synthesis over a diagnosed partition.

Downward pass: each missed problem spawns easier and condition-swapped
variants. Upward pass: each solved problem spawns harder and cross-topic
variants. Every candidate runs one pipeline: generate, solve, re-tag,
format-check, difficulty-bound check, verify. Failures land in `rejected`
with a reason; nothing aborts the batch.

Candidate slots are enumerated up front in pool order, processed with
bounded parallelism, and reassembled in slot order, so output is identical
at any worker count.
"""
from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from currigen import agents
from currigen.backends import Backend
from currigen.dataset import (
    MAX_LEVEL,
    MIN_LEVEL,
    Problem,
    ProblemPool,
    ProvenanceKind,
    SubjectCategory,
    dump_record,
    problem_to_record,
)
from currigen.errors import (
    BackendError,
    GenerationError,
    SolveError,
    TaggingError,
    ValidationError,
    VerifyError,
)
from currigen.synthetic import stable_int

REMEDY_KINDS = (ProvenanceKind.REDUCED, ProvenanceKind.REVERSED)
ADVANCE_KINDS = (ProvenanceKind.INCREASED, ProvenanceKind.DIVERSIFIED)

KIND_ID_PREFIX = {
    ProvenanceKind.REDUCED: "red",
    ProvenanceKind.REVERSED: "rev",
    ProvenanceKind.INCREASED: "inc",
    ProvenanceKind.DIVERSIFIED: "div",
}

DEFAULT_FANOUT = {"reduced": 1, "reversed": 1, "increased": 1, "diversified": 1}


@dataclass(frozen=True)
class DifficultyBounds:
    """Acceptance margins for re-tagged candidate levels: increased must

    gain at least `epsilon` levels, diversified must stay within `tau`."""

    epsilon: int = 1
    tau: int = 2

    def __post_init__(self):
        if not isinstance(self.epsilon, int) or self.epsilon < 1:
            raise ValidationError(f"epsilon must be an integer >= 1, got {self.epsilon!r}")
        if not isinstance(self.tau, int) or self.tau < 1:
            raise ValidationError(f"tau must be an integer >= 1, got {self.tau!r}")

    def reduced_ok(self, parent_level: int, new_level: int) -> bool:
        if parent_level == MIN_LEVEL:
            return new_level == MIN_LEVEL
        return new_level < parent_level

    def increased_ok(self, parent_level: int, new_level: int) -> bool:
        if parent_level == MAX_LEVEL:
            return new_level == MAX_LEVEL
        return new_level >= parent_level + self.epsilon

    def diversified_ok(self, parent_level: int, new_level: int) -> bool:
        return abs(new_level - parent_level) < self.tau

    def accepts(self, kind: ProvenanceKind, parent_level: int, new_level: int) -> bool:
        if kind is ProvenanceKind.REDUCED:
            return self.reduced_ok(parent_level, new_level)
        if kind is ProvenanceKind.INCREASED:
            return self.increased_ok(parent_level, new_level)
        if kind is ProvenanceKind.DIVERSIFIED:
            return self.diversified_ok(parent_level, new_level)
        # condition-swapped problems are accepted at any level
        return True


@dataclass(frozen=True)
class RejectedCandidate:
    id: str
    kind: str
    parent_id: str
    round_created: int
    reason: str
    query: str = ""
    level: Optional[int] = None
    subject: Optional[str] = None

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "parent_id": self.parent_id,
            "round_created": self.round_created,
            "reason": self.reason,
            "query": self.query,
            "level": self.level,
            "subject": self.subject,
        }

    def to_line(self) -> str:
        return dump_record(self.to_record())


@dataclass
class GenerationBatch:
    remedy: ProblemPool = field(default_factory=lambda: ProblemPool(name="remedy"))
    advanced: ProblemPool = field(default_factory=lambda: ProblemPool(name="advanced"))
    rejected: list = field(default_factory=list)

    def validate(self):
        for p in self.remedy:
            if p.provenance.kind not in REMEDY_KINDS:
                raise ValidationError(
                    f"remedy pool holds {p.provenance.kind.value} problem {p.id}"
                )
        for p in self.advanced:
            if p.provenance.kind not in ADVANCE_KINDS:
                raise ValidationError(
                    f"advanced pool holds {p.provenance.kind.value} problem {p.id}"
                )
        for p in list(self.remedy) + list(self.advanced):
            if not p.is_tagged:
                raise ValidationError(f"accepted problem {p.id} is not fully tagged")
        overlap = set(self.remedy.ids()) & set(self.advanced.ids())
        if overlap:
            raise ValidationError(f"remedy/advanced id collision: {sorted(overlap)[:5]}")


@dataclass(frozen=True)
class _Slot:
    parent: Problem
    kind: ProvenanceKind
    ordinal: int
    candidate_id: str
    target_level: Optional[int] = None
    target_subject: Optional[SubjectCategory] = None


def pick_diversify_subject(parent: Problem, ordinal: int, rng_seed: int) -> SubjectCategory:
    """Uniform draw over the six other categories, stable per

    (seed, parent, ordinal) so worker scheduling cannot shift it."""
    others = [s for s in SubjectCategory if s is not parent.subject]
    idx = stable_int(rng_seed, "diversify-target", parent.id, ordinal, mod=len(others))
    return others[idx]


def build_slots(
    hard: ProblemPool,
    easy: ProblemPool,
    round_index: int,
    fanout: dict,
    rng_seed: int,
) -> list:
    fanout = {**DEFAULT_FANOUT, **(fanout or {})}
    for key, count in fanout.items():
        if key not in DEFAULT_FANOUT:
            raise ValidationError(f"unknown fanout kind: {key!r}")
        if not isinstance(count, int) or count < 0:
            raise ValidationError(f"fanout[{key}] must be an integer >= 0, got {count!r}")
    slots = []

    def add(parent: Problem, kind: ProvenanceKind):
        for ordinal in range(fanout[kind.value]):
            cid = f"{KIND_ID_PREFIX[kind]}-r{round_index}-{parent.id}-{ordinal}"
            target_level = None
            target_subject = None
            if kind is ProvenanceKind.DIVERSIFIED:
                target_level = parent.level
                target_subject = pick_diversify_subject(parent, ordinal, rng_seed)
            slots.append(
                _Slot(parent, kind, ordinal, cid, target_level, target_subject)
            )

    for p in hard:
        for kind in REMEDY_KINDS:
            add(p, kind)
    for p in easy:
        for kind in ADVANCE_KINDS:
            add(p, kind)
    return slots


def filter_pipeline(
    candidate: Problem,
    solution: str,
    verifier: Backend,
    required_tags=("think",),
    temperature: float = 0.0,
    retries: int = 2,
):
    """Coarse-to-fine filter: cheap format check first, the verifier only

    for candidates that survive it. Returns (accepted, reason)."""
    if not agents.check_format(solution, required_tags):
        return False, "format"
    final = agents.extract_boxed(solution)
    answer_field = solution if final else ""
    try:
        verdict = agents.verify(
            verifier,
            candidate.query,
            answer_field,
            temperature=temperature,
            retries=retries,
        )
    except VerifyError:
        return False, "verifier-error"
    return (True, "") if verdict else (False, "verification")


def _process_slot(
    slot: _Slot,
    generator: Backend,
    verifier: Backend,
    round_index: int,
    bounds: DifficultyBounds,
    required_tags,
    temperatures: dict,
    retries: int,
):
    def rejected(reason: str, query: str = "", level=None, subject=None):
        return RejectedCandidate(
            id=slot.candidate_id,
            kind=slot.kind.value,
            parent_id=slot.parent.id,
            round_created=round_index,
            reason=reason,
            query=query,
            level=level,
            subject=subject.value if subject is not None else None,
        )

    try:
        candidate = agents.generate_variant(
            generator,
            slot.parent,
            slot.kind,
            candidate_id=slot.candidate_id,
            round_created=round_index,
            target_level=slot.target_level,
            target_subject=slot.target_subject,
            temperature=temperatures.get("generation", 0.7),
            retries=retries,
        )
    except (GenerationError, BackendError):
        return rejected("generation-error")

    try:
        solution = agents.solve(
            generator, candidate.query, temperature=temperatures.get("solving", 0.7)
        )
    except (SolveError, BackendError):
        return rejected("solve-error", query=candidate.query)

    try:
        level = agents.tag_difficulty(
            generator,
            candidate.query,
            temperature=temperatures.get("tagging", 0.0),
            retries=retries,
        )
        subject = agents.tag_subject(
            generator,
            candidate.query,
            temperature=temperatures.get("tagging", 0.0),
            retries=retries,
        )
    except (TaggingError, BackendError):
        return rejected("tagging-error", query=candidate.query)

    if not agents.check_format(solution, required_tags):
        return rejected("format", query=candidate.query, level=level, subject=subject)

    if slot.parent.level is not None and not bounds.accepts(slot.kind, slot.parent.level, level):
        return rejected(
            "difficulty bound", query=candidate.query, level=level, subject=subject
        )

    final = agents.extract_boxed(solution)
    answer_field = solution if final else ""
    try:
        verdict = agents.verify(
            verifier,
            candidate.query,
            answer_field,
            temperature=temperatures.get("verification", 0.0),
            retries=retries,
        )
    except (VerifyError, BackendError):
        return rejected(
            "verifier-error", query=candidate.query, level=level, subject=subject
        )
    if not verdict:
        return rejected(
            "verification", query=candidate.query, level=level, subject=subject
        )

    return Problem(
        id=candidate.id,
        query=candidate.query,
        answer=solution,
        level=level,
        subject=subject,
        err_count=0,
        provenance=candidate.provenance,
    )


def generate_batch(
    hard: ProblemPool,
    easy: ProblemPool,
    generator: Backend,
    verifier: Backend,
    round_index: int,
    fanout: Optional[dict] = None,
    bounds: Optional[DifficultyBounds] = None,
    required_tags=("think",),
    temperatures: Optional[dict] = None,
    retries: int = 2,
    rng_seed: int = 0,
    concurrency: int = 1,
) -> GenerationBatch:
    if concurrency < 1:
        raise ValidationError(f"concurrency must be >= 1, got {concurrency}")
    hard.require_tagged()
    easy.require_tagged()
    bounds = bounds or DifficultyBounds()
    temperatures = temperatures or {}
    slots = build_slots(hard, easy, round_index, fanout or {}, rng_seed)

    def work(slot: _Slot):
        return _process_slot(
            slot, generator, verifier, round_index, bounds, required_tags,
            temperatures, retries,
        )

    if concurrency == 1 or len(slots) <= 1:
        outcomes = [work(s) for s in slots]
    else:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            outcomes = list(pool.map(work, slots))

    batch = GenerationBatch()
    for slot, outcome in zip(slots, outcomes):
        if isinstance(outcome, RejectedCandidate):
            batch.rejected.append(outcome)
        elif slot.kind in REMEDY_KINDS:
            batch.remedy.add(outcome)
        else:
            batch.advanced.add(outcome)
    accepted = len(batch.remedy) + len(batch.advanced)
    if accepted + len(batch.rejected) != len(slots):
        raise ValidationError(
            f"candidate conservation violated: {accepted} accepted + "
            f"{len(batch.rejected)} rejected != {len(slots)} slots"
        )
    batch.validate()
    return batch


def tag_pool(
    pool: ProblemPool,
    backend: Backend,
    temperature: float = 0.0,
    retries: int = 2,
    concurrency: int = 1,
) -> ProblemPool:
    """Fills in missing difficulty/subject tags; already-tagged fields are

    trusted and left alone. Order-preserving at any worker count."""
    if concurrency < 1:
        raise ValidationError(f"concurrency must be >= 1, got {concurrency}")
    problems = list(pool)

    def work(problem: Problem) -> Problem:
        level = problem.level
        subject = problem.subject
        if level is None:
            level = agents.tag_difficulty(
                backend, problem.query, temperature=temperature, retries=retries
            )
        if subject is None:
            subject = agents.tag_subject(
                backend, problem.query, temperature=temperature, retries=retries
            )
        if level is problem.level and subject is problem.subject:
            return problem
        return dataclasses.replace(problem, level=level, subject=subject)

    if concurrency == 1 or len(problems) <= 1:
        tagged = [work(p) for p in problems]
    else:
        with ThreadPoolExecutor(max_workers=concurrency) as pool_exec:
            tagged = list(pool_exec.map(work, problems))
    return ProblemPool(name=pool.name, problems=tagged)


def downward_pass(hard: ProblemPool, **kwargs) -> GenerationBatch:
    return generate_batch(hard, ProblemPool(name="easy"), **kwargs)


def upward_pass(easy: ProblemPool, **kwargs) -> GenerationBatch:
    return generate_batch(ProblemPool(name="hard"), easy, **kwargs)

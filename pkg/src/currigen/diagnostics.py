"""Student diagnosis: run the student over a pool, verify its answers, and

split the pool into hard (missed) and easy (solved) halves. Any failure on
the way to a verdict is fail-closed: the problem counts as missed."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Protocol

from currigen.agents import solve, split_transcript, verify_raw
from currigen.backends import Backend
from currigen.dataset import Problem, ProblemPool, dump_record
from currigen.errors import CurrigenError, ValidationError


class StudentBackend(Protocol):
    def answer(self, problem: Problem, round_index: int) -> str: ...


class BackendStudent:
    """Adapts a chat backend into a student: each problem is posed through

    the solver prompt and the raw transcript comes back."""

    def __init__(self, backend: Backend, temperature: float = 0.7):
        self._backend = backend
        self.temperature = temperature

    def answer(self, problem: Problem, round_index: int) -> str:
        return solve(self._backend, problem.query, temperature=self.temperature)


@dataclass(frozen=True)
class EvalRecord:
    problem_id: str
    chain: str
    final: str
    correct: bool
    verifier_raw: str
    error: Optional[str] = None

    def to_record(self) -> dict:
        record = {
            "problem_id": self.problem_id,
            "chain": self.chain,
            "final": self.final,
            "correct": self.correct,
            "verifier_raw": self.verifier_raw,
        }
        if self.error is not None:
            record["error"] = self.error
        return record

    def to_line(self) -> str:
        return dump_record(self.to_record())

    @classmethod
    def from_record(cls, record: dict) -> "EvalRecord":
        allowed = {"problem_id", "chain", "final", "correct", "verifier_raw", "error"}
        extra = set(record) - allowed
        if extra:
            raise ValidationError(f"unexpected eval fields: {sorted(extra)}")
        missing = (allowed - {"error"}) - set(record)
        if missing:
            raise ValidationError(f"missing eval fields: {sorted(missing)}")
        return cls(
            problem_id=record["problem_id"],
            chain=record["chain"],
            final=record["final"],
            correct=bool(record["correct"]),
            verifier_raw=record["verifier_raw"],
            error=record.get("error"),
        )


def _evaluate_one(
    student: StudentBackend,
    verifier: Backend,
    problem: Problem,
    round_index: int,
    temperature: float,
    retries: int,
) -> EvalRecord:
    try:
        transcript = student.answer(problem, round_index)
    except CurrigenError as exc:
        return EvalRecord(problem.id, "", "", False, "", error=f"student: {exc}")
    chain, final = split_transcript(transcript)
    # no final answer -> incorrect outright, and the verifier is not consulted
    if not final:
        return EvalRecord(problem.id, chain, final, False, "")
    try:
        # the verifier judges the whole transcript: reasoning and final both
        verdict, raw = verify_raw(
            verifier,
            problem.query,
            transcript,
            temperature=temperature,
            retries=retries,
        )
    except CurrigenError as exc:
        return EvalRecord(problem.id, chain, final, False, "", error=f"verifier: {exc}")
    return EvalRecord(problem.id, chain, final, verdict, raw)


def evaluate(
    student: StudentBackend,
    verifier: Backend,
    pool: ProblemPool,
    round_index: int,
    temperature: float = 0.0,
    retries: int = 2,
    concurrency: int = 1,
) -> list:
    """Evaluates every problem and returns records in pool order, whatever

    the worker count. Verdict errors never abort the sweep."""
    if concurrency < 1:
        raise ValidationError(f"concurrency must be >= 1, got {concurrency}")
    pool.require_tagged()
    problems = list(pool)
    if not problems:
        return []

    def work(problem: Problem) -> EvalRecord:
        return _evaluate_one(student, verifier, problem, round_index, temperature, retries)

    if concurrency == 1:
        by_id = {p.id: work(p) for p in problems}
    else:
        with ThreadPoolExecutor(max_workers=concurrency) as pool_exec:
            records = pool_exec.map(work, problems)
            by_id = {r.problem_id: r for r in records}
    return [by_id[p.id] for p in problems]


@dataclass(frozen=True)
class Partition:
    hard: ProblemPool
    easy: ProblemPool


def partition(pool: ProblemPool, records: list) -> Partition:
    """Splits the pool into hard/easy by verifier verdict.

    The records must cover the pool exactly; anything missing or foreign is
    an error rather than a silent skip."""
    seen = [r.problem_id for r in records]
    seen_set = set(seen)
    if len(seen) != len(seen_set):
        dupes = sorted({i for i in seen if seen.count(i) > 1})
        raise ValidationError(f"duplicate eval records for: {dupes[:5]}")
    pool_ids = set(pool.ids())
    missing = pool_ids - seen_set
    foreign = seen_set - pool_ids
    if missing or foreign:
        raise ValidationError(
            f"eval records do not cover pool {pool.name!r} exactly "
            f"(missing={sorted(missing)[:5]}, foreign={sorted(foreign)[:5]})"
        )
    verdict = {r.problem_id: r.correct for r in records}
    return Partition(
        hard=ProblemPool(name="hard", problems=(p for p in pool if not verdict[p.id])),
        easy=ProblemPool(name="easy", problems=(p for p in pool if verdict[p.id])),
    )

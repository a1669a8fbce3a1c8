"""Shared fixture-building helpers for the test suite."""
from __future__ import annotations

import re

from currigen.dataset import Problem, Provenance, ProvenanceKind, SubjectCategory
from currigen.synthetic import stable_int, synthetic_query


def make_problem(
    pid,
    level=5,
    subject=SubjectCategory.ALGEBRA,
    err_count=0,
    kind=ProvenanceKind.SEED,
    parent_id=None,
    round_created=0,
    key=None,
    answer=None,
    query=None,
):
    """A fully tagged problem whose query carries the machine markers the

    mock agents read back. answer defaults to the key, like a raw corpus."""
    key = key or f"k{stable_int('fixture', pid, mod=100000):05d}"
    return Problem(
        id=pid,
        query=query if query is not None else synthetic_query(subject, level, key),
        answer=answer if answer is not None else key,
        level=level,
        subject=subject,
        err_count=err_count,
        provenance=Provenance(kind, parent_id, round_created),
    )


def problem_key(problem: Problem) -> str:
    import re

    m = re.search(r"\[key:\s*([0-9a-zA-Z]+)\]", problem.query)
    return m.group(1) if m else ""


class CountingBackend:
    """Pass-through wrapper that records every call it forwards."""

    def __init__(self, inner):
        self.inner = inner
        self.calls = []

    def complete(self, call):
        self.calls.append(call)
        return self.inner.complete(call)

    def calls_for_role(self, role):
        return [c for c in self.calls if c.role == role]


class SequenceBackend:
    """Replies from a fixed list, in call order; repeats the last one."""

    def __init__(self, replies):
        self.replies = list(replies)
        self.calls = 0

    def complete(self, call):
        idx = min(self.calls, len(self.replies) - 1)
        self.calls += 1
        return self.replies[idx]


class LevelFuzzBackend:
    """Wraps the marker mock and rewrites each variant's level marker to a

    hash-picked value in 1..10, so bound checks see adversarial levels."""

    FUZZ_ROLES = ("reduce", "increase", "diversify", "reverse")

    def __init__(self, inner):
        self.inner = inner

    @staticmethod
    def fuzz_level(role, prompt):
        return 1 + stable_int("fuzz", role, prompt, mod=10)

    def complete(self, call):
        reply = self.inner.complete(call)
        if call.role in self.FUZZ_ROLES:
            new_level = self.fuzz_level(call.role, call.prompt)
            reply = re.sub(r"\[level: \d+\]", f"[level: {new_level}]", reply)
        return reply


class RaisingStudent:
    def __init__(self, exc):
        self.exc = exc

    def answer(self, problem, round_index):
        raise self.exc


class FixedStudent:
    """Answers each problem from a dict of id -> transcript."""

    def __init__(self, transcripts, default=""):
        self.transcripts = dict(transcripts)
        self.default = default

    def answer(self, problem, round_index):
        return self.transcripts.get(problem.id, self.default)


def audit_round_transition(run_dir, t, threshold):
    """Cross-checks one round's pool transition against its artifacts.

    Every problem leaving the validation pool must leave for one of the two
    sanctioned reasons (solved, or error count past the threshold with a
    transfer into training); counters only ever climb; newcomers are exactly
    that round's accepted advanced variants. Returns the sets a caller needs
    to extend the audit across rounds.
    """
    import json
    from pathlib import Path

    from currigen.dataset import load_pool
    from currigen.diagnostics import EvalRecord

    prev_dir = Path(run_dir) / f"round_{t - 1}"
    cur_dir = Path(run_dir) / f"round_{t}"
    prev_val = load_pool(prev_dir / "val.jsonl", name="prev")
    new_val = load_pool(cur_dir / "val.jsonl", name="new")
    new_train = load_pool(cur_dir / "train.jsonl", name="train")
    mastered = load_pool(cur_dir / "mastered.jsonl", name="mastered")
    remedy = load_pool(cur_dir / "remedy.jsonl", name="remedy")

    records = [
        EvalRecord.from_record(json.loads(line))
        for line in (cur_dir / "eval.jsonl").read_text(encoding="utf-8").splitlines()
        if line
    ]
    correct = {r.problem_id: r.correct for r in records}
    assert set(correct) == set(prev_val.ids()), f"round {t}: eval does not cover val"

    prev_err = {p.id: p.err_count for p in prev_val}
    new_err = {p.id: p.err_count for p in new_val}
    mastered_ids = set(mastered.ids())
    train_ids = set(new_train.ids())
    transferred = set()

    for pid in prev_val.ids():
        if correct[pid]:
            assert pid in mastered_ids, f"round {t}: solved {pid} not archived"
            assert pid not in new_err, f"round {t}: solved {pid} still in val"
            assert pid not in train_ids, f"round {t}: solved {pid} entered train"
        else:
            bumped = prev_err[pid] + 1
            if bumped > threshold:
                assert pid in train_ids, f"round {t}: stubborn {pid} not transferred"
                assert pid not in new_err, f"round {t}: stubborn {pid} still in val"
                transferred.add(pid)
            else:
                assert new_err.get(pid) == bumped, (
                    f"round {t}: {pid} err {prev_err[pid]} -> {new_err.get(pid)}"
                )

    assert mastered_ids == {pid for pid in prev_val.ids() if correct[pid]}
    assert train_ids == set(remedy.ids()) | transferred, f"round {t}: train composition"

    newcomers = set(new_val.ids()) - set(prev_val.ids())
    for pid in newcomers:
        p = new_val.get(pid)
        assert p.provenance.kind.value in ("increased", "diversified")
        assert p.provenance.round_created == t
        assert p.err_count == 0

    leavers = mastered_ids | transferred
    return leavers, newcomers, train_ids

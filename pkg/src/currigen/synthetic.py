"""Deterministic synthetic corpus plus mock agents for offline runs.

Synthetic problems embed machine-readable markers in the statement text:

    [subject: Algebra] [level: 3] [key: k4821]

The mock agents never guess: they read the markers back out of whatever
prompt they receive, so tagging, generation, solving and verification stay
mutually consistent. Every reply is a pure function of the rendered prompt,
which is what makes scripted replay and concurrency-independent runs work.
"""
from __future__ import annotations

import hashlib
import math
import re

from currigen.agents import extract_boxed
from currigen.backends import AgentCall
from currigen.dataset import (
    MAX_LEVEL,
    MIN_LEVEL,
    Problem,
    ProblemPool,
    SubjectCategory,
)
from currigen.errors import BackendError

_LEVEL_MARK = re.compile(r"\[level:\s*(\d+)\]")
_SUBJECT_MARK = re.compile(r"\[subject:\s*([^\]]+)\]")
_KEY_MARK = re.compile(r"\[key:\s*([0-9a-zA-Z]+)\]")
_TARGET_LEVEL_RE = re.compile(r"Target Level:\s*(\d+)")
_TARGET_TYPE_RE = re.compile(r"Target Type:\s*([^\n|]+)")
_VERIFY_INPUT_RE = re.compile(
    r"## Input Data\nQuery: (?P<q>.*?)\nAnswer: (?P<a>.*?)\n\n## Execution Instruction",
    re.DOTALL,
)
_SOLVE_INPUT_RE = re.compile(r"## Problem\n(?P<q>.*?)\n\n## Output Format", re.DOTALL)


def stable_fraction(*parts) -> float:
    """Hash-derived float in [0, 1): the same inputs always give the same

    draw, with no shared RNG state to order-couple concurrent workers."""
    blob = "\x1f".join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.sha256(blob).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def stable_int(*parts, mod: int) -> int:
    blob = "\x1f".join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.sha256(blob).digest()
    return int.from_bytes(digest[:8], "big") % mod


def synthetic_query(subject: SubjectCategory, level: int, key: str) -> str:
    return (
        f"Exercise {key}: determine the required value for this "
        f"{subject.value.lower()} setup. [subject: {subject.value}] "
        f"[level: {level}] [key: {key}]"
    )


def make_synthetic_corpus(counts: dict, rng_seed: int) -> ProblemPool:
    """Builds a raw corpus: subject known up front (as in public problem

    sets), difficulty left for the tagging pass, answer equal to the key."""
    pool = ProblemPool(name="corpus")
    for subject in SubjectCategory:
        want = counts.get(subject, 0)
        for i in range(want):
            key = f"k{stable_int(rng_seed, subject.value, i, mod=100000):05d}"
            level = 1 + stable_int(rng_seed, "lvl", subject.value, i, mod=MAX_LEVEL)
            slug = subject.value.lower().replace(" & ", "-").replace(" ", "-")
            pool.add(
                Problem(
                    id=f"syn-{slug}-{i:03d}",
                    query=synthetic_query(subject, level, key),
                    answer=key,
                    subject=subject,
                )
            )
    return pool


def _query_marks(text: str):
    lvl = _LEVEL_MARK.search(text)
    subj = _SUBJECT_MARK.search(text)
    key = _KEY_MARK.search(text)
    return (
        int(lvl.group(1)) if lvl else None,
        subj.group(1).strip() if subj else None,
        key.group(1) if key else None,
    )


def _variant_statement(kind: str, subject: str, level: int, key: str) -> str:
    openers = {
        "reduce": "Practice variant",
        "increase": "Extension variant",
        "diversify": "query: Cross-topic variant",
        "reverse": "Inverse variant",
    }
    return (
        f"{openers[kind]} {key}: determine the required value for this "
        f"{subject.lower()} setup. [subject: {subject}] [level: {level}] "
        f"[key: {key}]"
    )


class MockAgentBackend:
    """Marker-driven stand-in for every agent role.

    verifier_noise downgrades a hash-selected fraction of correct verdicts
    to "no" (never the reverse), so rejection paths get exercised without
    ever letting a wrong answer through.
    """

    def __init__(self, verifier_noise: float = 0.0):
        if not 0.0 <= verifier_noise < 1.0:
            raise BackendError("verifier_noise must be in [0, 1)")
        self.verifier_noise = verifier_noise

    def complete(self, call: AgentCall) -> str:
        handler = getattr(self, f"_do_{call.role}", None)
        if handler is None:
            raise BackendError(f"mock backend has no role {call.role!r}")
        return handler(call.prompt)

    def _do_difficulty_tag(self, prompt: str) -> str:
        level, _, _ = _query_marks(prompt)
        if level is None:
            raise BackendError("mock tagger found no level marker in prompt")
        return f"<score> {level} </score>"

    def _do_subject_tag(self, prompt: str) -> str:
        _, subject, _ = _query_marks(prompt)
        if subject is None:
            raise BackendError("mock tagger found no subject marker in prompt")
        return subject

    def _fresh_key(self, kind: str, prompt: str) -> str:
        return f"k{stable_int(kind, hashlib.sha256(prompt.encode()).hexdigest(), mod=100000):05d}"

    def _do_reduce(self, prompt: str) -> str:
        level, subject, _ = _query_marks(prompt)
        if level is None or subject is None:
            raise BackendError("mock reducer needs level and subject markers")
        new_level = level - 1 if level > MIN_LEVEL else MIN_LEVEL
        return _variant_statement("reduce", subject, new_level, self._fresh_key("reduce", prompt))

    def _do_increase(self, prompt: str) -> str:
        level, subject, _ = _query_marks(prompt)
        if level is None or subject is None:
            raise BackendError("mock increaser needs level and subject markers")
        new_level = level + 1 if level < MAX_LEVEL else MAX_LEVEL
        return _variant_statement("increase", subject, new_level, self._fresh_key("increase", prompt))

    def _do_diversify(self, prompt: str) -> str:
        target_level = _TARGET_LEVEL_RE.search(prompt)
        target_type = _TARGET_TYPE_RE.search(prompt)
        if target_level is None or target_type is None:
            raise BackendError("mock diversifier needs target level and type")
        return _variant_statement(
            "diversify",
            target_type.group(1).strip(),
            int(target_level.group(1)),
            self._fresh_key("diversify", prompt),
        )

    def _do_reverse(self, prompt: str) -> str:
        level, subject, _ = _query_marks(prompt)
        if level is None or subject is None:
            raise BackendError("mock reverser needs level and subject markers")
        return _variant_statement("reverse", subject, level, self._fresh_key("reverse", prompt))

    def _do_solve(self, prompt: str) -> str:
        m = _SOLVE_INPUT_RE.search(prompt)
        if m is None:
            raise BackendError("mock solver cannot locate the problem section")
        _, _, key = _query_marks(m.group("q"))
        if key is None:
            return "<think>no usable key found</think>\nunable to finish"
        return f"<think>worked derivation for {key}</think>\n\\boxed{{{key}}}"

    def _do_verify(self, prompt: str) -> str:
        m = _VERIFY_INPUT_RE.search(prompt)
        if m is None:
            raise BackendError("mock verifier cannot locate the input section")
        _, _, key = _query_marks(m.group("q"))
        answer = m.group("a").strip()
        # the answer field may be a full transcript; judge its boxed final
        boxed = extract_boxed(answer)
        claimed = boxed if boxed is not None else answer
        correct = key is not None and claimed.strip() == key
        if correct and self.verifier_noise > 0.0:
            if stable_fraction("verify-noise", prompt) < self.verifier_noise:
                return "no"
        return "yes" if correct else "no"


class SyntheticStudent:
    """Deterministic stand-in for the model being trained.

    threshold mode: solves exactly the problems at or below its capability.
    logistic mode: solve probability 1/(1+exp(-slope*(capability-level))),
    drawn from a stable hash of (seed, problem id, round) so repeat runs and
    any concurrency bound see identical outcomes.
    """

    def __init__(
        self,
        capability: float,
        mode: str = "threshold",
        slope: float = 2.0,
        rng_seed: int = 0,
    ):
        if mode not in ("threshold", "logistic"):
            raise BackendError(f"unknown student mode: {mode!r}")
        self.capability = float(capability)
        self.mode = mode
        self.slope = float(slope)
        self.rng_seed = rng_seed

    def _solves(self, problem: Problem, round_index: int) -> bool:
        level = problem.level
        if level is None:
            return False
        if self.mode == "threshold":
            return level <= self.capability
        p = 1.0 / (1.0 + math.exp(-self.slope * (self.capability - level)))
        draw = stable_fraction(self.rng_seed, "student", problem.id, round_index)
        return draw < p

    def answer(self, problem: Problem, round_index: int) -> str:
        _, _, key = _query_marks(problem.query)
        if key is None:
            key = problem.answer or "unknown"
        if self._solves(problem, round_index):
            return (
                f"<think>attempt on {problem.id} at round {round_index}</think>\n"
                f"Final answer: \\boxed{{{key}}}"
            )
        # two failure shapes: most give a wrong boxed value, some give up
        # with no final at all (exercises the fail-closed path downstream)
        if stable_int(self.rng_seed, "giveup", problem.id, round_index, mod=7) == 0:
            return (
                f"<think>attempt on {problem.id} at round {round_index}</think>\n"
                "I could not finish this one."
            )
        return (
            f"<think>attempt on {problem.id} at round {round_index}</think>\n"
            f"\\boxed{{{key}9}}"
        )

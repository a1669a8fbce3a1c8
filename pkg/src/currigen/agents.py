"""Role-level agents on top of a backend: tagging, generation, solving,
verification, plus the strict reply parsers they share."""
from __future__ import annotations

import re
from typing import Optional

from currigen.backends import AgentCall, Backend
from currigen.dataset import (
    MAX_LEVEL,
    MIN_LEVEL,
    Problem,
    Provenance,
    ProvenanceKind,
    SubjectCategory,
)
from currigen.errors import (
    DatasetError,
    GenerationError,
    ParseError,
    RangeError,
    SolveError,
    TaggingError,
    VerifyError,
)
from currigen.prompts import render_prompt

_SCORE_RE = re.compile(r"<score>(.*?)</score>", re.DOTALL)
_QUERY_PREFIX_RE = re.compile(r"^\s*query\s*:\s*", re.IGNORECASE)

# Replies from the condition-swap role must read as a bare problem statement;
# these substrings betray meta-commentary or answer formatting leaking in.
_REVERSAL_META_MARKERS = ("reversed", "here is", "\\boxed{")


def parse_score(text: str) -> int:
    matches = _SCORE_RE.findall(text)
    if len(matches) != 1:
        raise ParseError(
            f"expected exactly one <score> block, found {len(matches)}"
        )
    raw = matches[0].strip()
    try:
        value = int(raw)
    except ValueError:
        raise ParseError(f"score is not an integer: {raw!r}") from None
    if not MIN_LEVEL <= value <= MAX_LEVEL:
        raise RangeError(f"score out of range [1,10]: {value}")
    return value


def parse_verdict(text: str) -> bool:
    word = text.strip().lower()
    if word == "yes":
        return True
    if word == "no":
        return False
    raise VerifyError(f"verdict must be yes or no, got {text.strip()[:80]!r}")


def parse_statement(text: str, forbid_reversal_meta: bool = False) -> str:
    statement = _QUERY_PREFIX_RE.sub("", text.strip()).strip()
    if not statement:
        raise GenerationError("empty problem statement", last_reply=text)
    if forbid_reversal_meta:
        lowered = statement.lower()
        for marker in _REVERSAL_META_MARKERS:
            if marker in lowered:
                raise GenerationError(
                    f"statement contains forbidden marker {marker!r}",
                    last_reply=text,
                )
    return statement


def extract_tagged(text: str, tag: str) -> Optional[str]:
    open_tag, close_tag = f"<{tag}>", f"</{tag}>"
    start = text.find(open_tag)
    if start < 0:
        return None
    end = text.find(close_tag, start + len(open_tag))
    if end < 0:
        return None
    return text[start + len(open_tag) : end]


def extract_boxed(text: str) -> Optional[str]:
    # last \boxed{...}; braces nest inside LaTeX so count depth by hand
    start = text.rfind("\\boxed{")
    if start < 0:
        return None
    depth = 0
    for i in range(start + len("\\boxed{") - 1, len(text)):
        ch = text[i]
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start + len("\\boxed{") : i]
    return None


def check_format(text: str, required_tags=("think",)) -> bool:
    for tag in required_tags:
        open_tag, close_tag = f"<{tag}>", f"</{tag}>"
        start = text.find(open_tag)
        if start < 0:
            return False
        if text.find(close_tag, start + len(open_tag)) < 0:
            return False
    return True


def split_transcript(text: str):
    """Returns (chain, final): reasoning inside <think> and the last boxed

    answer. Either half may be empty when the transcript is malformed."""
    chain = extract_tagged(text, "think") or ""
    final = extract_boxed(text) or ""
    return chain.strip(), final.strip()


def _retry_parse(backend: Backend, call: AgentCall, parser, retries: int, error_cls):
    last_reply = None
    last_error = None
    for _ in range(retries + 1):
        last_reply = backend.complete(call)
        try:
            return parser(last_reply)
        except ParseError as exc:
            last_error = exc
    raise error_cls(
        f"{last_error} after {retries + 1} attempt(s)", last_reply=last_reply
    )


def tag_difficulty(
    backend: Backend, query: str, temperature: float = 0.0, retries: int = 2
) -> int:
    call = AgentCall(
        role="difficulty_tag",
        prompt=render_prompt("difficulty_tag", instruction=query),
        temperature=temperature,
    )
    return _retry_parse(backend, call, parse_score, retries, TaggingError)


def tag_subject(
    backend: Backend, query: str, temperature: float = 0.0, retries: int = 2
) -> SubjectCategory:
    def parser(reply: str) -> SubjectCategory:
        try:
            return SubjectCategory.parse(reply.strip())
        except DatasetError as exc:
            raise ParseError(str(exc)) from None

    call = AgentCall(
        role="subject_tag",
        prompt=render_prompt("subject_tag", instruction=query),
        temperature=temperature,
    )
    return _retry_parse(backend, call, parser, retries, TaggingError)


# role name per synthesis kind
KIND_ROLES = {
    ProvenanceKind.REDUCED: "reduce",
    ProvenanceKind.REVERSED: "reverse",
    ProvenanceKind.INCREASED: "increase",
    ProvenanceKind.DIVERSIFIED: "diversify",
}


def variant_prompt(
    role: str,
    parent: Problem,
    target_level: Optional[int] = None,
    target_subject: Optional[SubjectCategory] = None,
) -> str:
    if role in ("reduce", "increase"):
        return render_prompt(
            role,
            query=parent.query,
            answer=parent.answer,
            difficulty=parent.level,
            type=parent.subject.value,
        )
    if role == "diversify":
        if target_level is None or target_subject is None:
            raise GenerationError("diversify requires target_level and target_subject")
        return render_prompt(
            "diversify",
            query=parent.query,
            answer=parent.answer,
            original_level=parent.level,
            target_level=target_level,
            type=target_subject.value,
        )
    if role == "reverse":
        return render_prompt("reverse", query=parent.query, answer=parent.answer)
    raise GenerationError(f"unknown generation role: {role!r}")


def generate_variant(
    backend: Backend,
    parent: Problem,
    kind: ProvenanceKind,
    candidate_id: str,
    round_created: int,
    target_level: Optional[int] = None,
    target_subject: Optional[SubjectCategory] = None,
    temperature: float = 0.7,
    retries: int = 1,
) -> Problem:
    """Runs one synthesis role against a fully tagged parent and returns the

    candidate: statement only, level/subject/answer left for re-tagging."""
    role = KIND_ROLES.get(kind)
    if role is None:
        raise GenerationError(f"cannot generate variants of kind {kind!r}")
    prompt = variant_prompt(role, parent, target_level, target_subject)
    call = AgentCall(role=role, prompt=prompt, temperature=temperature)

    def parser(reply: str) -> str:
        return parse_statement(reply, forbid_reversal_meta=(role == "reverse"))

    statement = _retry_parse(backend, call, parser, retries, GenerationError)
    return Problem(
        id=candidate_id,
        query=statement,
        provenance=Provenance(
            kind=kind, parent_id=parent.id, round_created=round_created
        ),
    )


def solve(backend: Backend, query: str, temperature: float = 0.7, retries: int = 1) -> str:
    """Asks the solver for a worked transcript. Returned raw: the format

    filter downstream decides whether the transcript is acceptable."""
    call = AgentCall(
        role="solve",
        prompt=render_prompt("solve", query=query),
        temperature=temperature,
    )
    reply = ""
    for _ in range(retries + 1):
        reply = backend.complete(call)
        if reply.strip():
            return reply
    raise SolveError("solver returned an empty reply", last_reply=reply)


def verify_raw(
    backend: Backend,
    query: str,
    answer: str,
    temperature: float = 0.0,
    retries: int = 2,
):
    """Returns (verdict, raw reply). An empty answer is incorrect by

    definition and never burns a backend call."""
    if not answer or not answer.strip():
        return False, ""
    call = AgentCall(
        role="verify",
        prompt=render_prompt("verify", query=query, answer=answer),
        temperature=temperature,
    )
    last_reply = None
    last_error = None
    for _ in range(retries + 1):
        last_reply = backend.complete(call)
        try:
            return parse_verdict(last_reply), last_reply
        except ParseError as exc:
            last_error = exc
    raise VerifyError(
        f"{last_error} after {retries + 1} attempt(s)", last_reply=last_reply
    )


def verify(
    backend: Backend,
    query: str,
    answer: str,
    temperature: float = 0.0,
    retries: int = 2,
) -> bool:
    verdict, _ = verify_raw(backend, query, answer, temperature, retries)
    return verdict

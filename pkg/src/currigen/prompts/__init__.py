"""Prompt template registry and rendering.

Templates live as plain-text assets next to this package. Rendering is a
narrow substitution pass over a fixed placeholder vocabulary instead of
str.format, because the templates are full of literal braces (LaTeX, the
``\\boxed{}`` output contract, score tags) that must survive untouched.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from currigen.errors import ValidationError

# Only these names are ever substituted; any other {...} is literal text.
PLACEHOLDER_NAMES = (
    "instruction",
    "query",
    "answer",
    "difficulty",
    "type",
    "target_level",
    "original_level",
)

_PLACEHOLDER_RE = re.compile(r"\{(" + "|".join(PLACEHOLDER_NAMES) + r")\}")

ROLES = (
    "difficulty_tag",
    "subject_tag",
    "reduce",
    "increase",
    "diversify",
    "reverse",
    "verify",
    "solve",
)


@dataclass(frozen=True)
class PromptTemplate:
    role: str
    text: str
    placeholders: frozenset

    def render(self, **values) -> str:
        missing = self.placeholders - set(values)
        if missing:
            # extra bindings are ignored; missing ones are a caller bug
            raise ValidationError(f"unbound placeholder: {sorted(missing)[0]}")
        return _PLACEHOLDER_RE.sub(lambda m: str(values[m.group(1)]), self.text)


@lru_cache(maxsize=None)
def get_template(role: str) -> PromptTemplate:
    if role not in ROLES:
        raise ValidationError(f"unknown prompt role: {role!r}")
    text = (
        resources.files("currigen.prompts")
        .joinpath("assets", f"{role}.txt")
        .read_text(encoding="utf-8")
    )
    names = frozenset(_PLACEHOLDER_RE.findall(text))
    return PromptTemplate(role=role, text=text, placeholders=names)


def render_prompt(role: str, **values) -> str:
    return get_template(role).render(**values)

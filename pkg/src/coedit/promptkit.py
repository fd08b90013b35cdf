"""Instruction templates and structured-response parsers.

Templates ship as text assets (see ``assets/templates``) and are loaded,
never inlined, so they can be audited as plain files. Substitution is a
single pass over the template: values are inserted verbatim and never
re-scanned for placeholders.

Parsers are deliberately lenient — models often restate the question or
wrap answers in prose, so each parser extracts the *last* parseable
answer. They are total: any byte string either parses or raises a typed
``ParseError``.
"""
from __future__ import annotations

import ast
import re
from dataclasses import dataclass
from enum import Enum

from .assets import asset_text
from .errors import (
    EmptyList,
    EmptyResponse,
    EmptySelection,
    FairnessConstraintViolated,
    NoListFound,
    TagOutOfRange,
)


class Task(str, Enum):
    SAFETY = "safety"
    FAIRNESS = "fairness"
    PRIVACY = "privacy"


@dataclass(frozen=True)
class ConceptSpec:
    """A risk concept plus the subtask it belongs to.

    The concept is trimmed and internal whitespace runs are collapsed;
    case is preserved (privacy concepts are named entities).
    """

    concept: str
    task: Task

    def __post_init__(self):
        normalized = " ".join(str(self.concept).split())
        if not normalized:
            raise ValueError("concept must be nonempty after trimming")
        object.__setattr__(self, "concept", normalized)
        object.__setattr__(self, "task", Task(self.task))


@dataclass(frozen=True)
class KnowledgeResult:
    """Expanded concept descriptions; the last candidate is the best one."""

    candidates: tuple[str, ...]
    best: str

    @classmethod
    def from_candidates(cls, candidates) -> "KnowledgeResult":
        candidates = tuple(candidates)
        if not candidates:
            raise EmptyList("knowledge list has no members")
        return cls(candidates, candidates[-1])


@dataclass(frozen=True)
class FocusSelection:
    """The 1-based tag ids the model pointed at."""

    tag_ids: frozenset[int]


@dataclass(frozen=True)
class ModificationTarget:
    """The concrete inpainting prompt planned for the focus region."""

    prompt: str
    task: Task


def _substitute(template: str, values: dict[str, str]) -> str:
    pattern = re.compile(r"\{(" + "|".join(re.escape(k) for k in values) + r")\}")
    return pattern.sub(lambda m: values[m.group(1)], template)


def render_knowledge_instruction(spec: ConceptSpec) -> str:
    return _substitute(asset_text("templates/knowledge.txt"), {"concept": spec.concept})


def render_focus_instruction(knowledge: KnowledgeResult, spec: ConceptSpec) -> str:
    return _substitute(
        asset_text("templates/focus.txt"),
        {"referring knowledge": knowledge.best, "concept": spec.concept},
    )


def render_modification_instruction(spec: ConceptSpec) -> str:
    """Compose the task frame with the subtask's goal and steps blocks."""
    goal = _substitute(
        asset_text(f"templates/goal_{spec.task.value}.txt"), {"concept": spec.concept}
    )
    steps = _substitute(
        asset_text(f"templates/steps_{spec.task.value}.txt"), {"concept": spec.concept}
    )
    return _substitute(
        asset_text("templates/modification_frame.txt"),
        {"task": spec.task.value, "task goal": goal, "task steps": steps},
    )


def render_baseline_instruction(spec: ConceptSpec) -> str:
    """The plain editing condition used by baselines and ablation runs."""
    name = "baseline_variety.txt" if spec.task is Task.FAIRNESS else "baseline_remove.txt"
    return _substitute(asset_text(f"templates/{name}"), {"concept": spec.concept})


# --- response parsing ---------------------------------------------------------

# bracketed group whose bare content has no brackets, but whose quoted
# strings may contain anything (so ["a [big] dog"] still matches whole)
_LIST_RE = re.compile(
    r"\[(?:[^\[\]\"']|\"(?:[^\"\\]|\\.)*\"|'(?:[^'\\]|\\.)*')*\]", re.DOTALL
)
_MAX_LITERAL_LEN = 20_000


def _iter_list_literals(text: str):
    if "[" not in text:
        return
    for match in _LIST_RE.finditer(text):
        chunk = match.group(0)
        if len(chunk) > _MAX_LITERAL_LEN:
            continue
        try:
            value = ast.literal_eval(chunk)
        except Exception:
            continue
        if isinstance(value, list):
            yield value


def parse_knowledge_response(text: str) -> KnowledgeResult:
    """Extract the last bracketed list of strings; its last member is best."""
    last = None
    for value in _iter_list_literals(text):
        if all(isinstance(v, str) for v in value):
            last = value
    if last is None:
        raise NoListFound("no list of quoted strings in response")
    if not last:
        raise EmptyList("knowledge list has no members")
    return KnowledgeResult.from_candidates(last)


def parse_focus_response(text: str, max_tag: int) -> FocusSelection:
    """Extract the last bracketed list of tag numbers, deduplicated."""
    if max_tag < 1:
        raise ValueError("max_tag must be >= 1")
    last = None
    for value in _iter_list_literals(text):
        if all(isinstance(v, int) and not isinstance(v, bool) for v in value):
            last = value
    if last is None:
        raise NoListFound("no list of numbers in response")
    if not last:
        raise EmptySelection("focus list has no members")
    ids = frozenset(last)
    bad = sorted(i for i in ids if i < 1 or i > max_tag)
    if bad:
        raise TagOutOfRange(f"tags {bad} outside 1..{max_tag}")
    return FocusSelection(ids)


_QUOTE_PAIRS = [('"', '"'), ("'", "'"), ("“", "”"), ("‘", "’"), ("`", "`")]


def _unwrap(text: str) -> str:
    s = text.strip()
    while True:
        before = s
        if s.startswith("```") and s.endswith("```") and len(s) > 6:
            body = s[3:-3]
            # drop a language hint on the opening fence
            if "\n" in body:
                first, rest = body.split("\n", 1)
                if first and " " not in first.strip() and not first.strip().startswith("["):
                    body = rest
            s = body.strip()
        for open_q, close_q in _QUOTE_PAIRS:
            if len(s) >= 2 and s.startswith(open_q) and s.endswith(close_q):
                s = s[len(open_q) : -len(close_q)].strip()
        if s == before:
            return s


def parse_modification_response(text: str, spec: ConceptSpec) -> ModificationTarget:
    """Trim wrapping quotes/markup and enforce the fairness phrasing rule."""
    prompt = _unwrap(text)
    if not prompt:
        raise EmptyResponse("modification response is empty after trimming")
    if spec.task is Task.FAIRNESS:
        required = f"different {spec.concept}"
        if required not in prompt:
            raise FairnessConstraintViolated(f'prompt lacks "{required}"')
    return ModificationTarget(prompt, spec.task)

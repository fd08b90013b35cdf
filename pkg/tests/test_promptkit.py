from __future__ import annotations

import random
import re

import pytest

from coedit.assets import asset_text
from coedit.backends import Backends, ChatTurn, ScriptedChat
from coedit.errors import (
    CoeditError,
    EmptyList,
    EmptyResponse,
    EmptySelection,
    FairnessConstraintViolated,
    NoListFound,
    TagOutOfRange,
)
from coedit.promptkit import (
    ConceptSpec,
    KnowledgeResult,
    Task,
    parse_focus_response,
    parse_knowledge_response,
    parse_modification_response,
    render_baseline_instruction,
    render_focus_instruction,
    render_knowledge_instruction,
    render_modification_instruction,
)

SENTINEL = "XCONCEPTX"


def oracle_substitute(template: str, values: dict[str, str]) -> str:
    """Independent substitution: plain replace, longest keys first."""
    out = template
    for key in sorted(values, key=len, reverse=True):
        out = out.replace("{" + key + "}", values[key])
    return out


# --- template fidelity ------------------------------------------------------

def test_knowledge_template_fidelity():
    spec = ConceptSpec(SENTINEL, Task.SAFETY)
    golden = asset_text("templates/knowledge.txt")
    assert render_knowledge_instruction(spec) == oracle_substitute(
        golden, {"concept": SENTINEL}
    )
    assert f"concept: {SENTINEL}" in render_knowledge_instruction(spec)


def test_focus_template_fidelity():
    spec = ConceptSpec("drugs", Task.SAFETY)
    knowledge = KnowledgeResult.from_candidates(["XBESTX"])
    golden = asset_text("templates/focus.txt")
    rendered = render_focus_instruction(knowledge, spec)
    assert rendered == oracle_substitute(
        golden, {"referring knowledge": "XBESTX", "concept": "drugs"}
    )
    assert "Don't include background." in rendered
    assert "related to drugs according to this definition" in rendered


def test_focus_substitution_is_single_pass():
    spec = ConceptSpec(SENTINEL, Task.SAFETY)
    tricky = KnowledgeResult.from_candidates(["braces {concept} stay verbatim"])
    rendered = render_focus_instruction(tricky, spec)
    assert "braces {concept} stay verbatim" in rendered


@pytest.mark.parametrize("task", list(Task))
def test_modification_template_fidelity(task):
    spec = ConceptSpec(SENTINEL, task)
    goal = oracle_substitute(
        asset_text(f"templates/goal_{task.value}.txt"), {"concept": SENTINEL}
    )
    steps = oracle_substitute(
        asset_text(f"templates/steps_{task.value}.txt"), {"concept": SENTINEL}
    )
    expected = oracle_substitute(
        asset_text("templates/modification_frame.txt"),
        {"task": task.value, "task goal": goal, "task steps": steps},
    )
    assert render_modification_instruction(spec) == expected


def test_modification_task_markers():
    assert "avoiding containing concept: alcohol" in render_modification_instruction(
        ConceptSpec("alcohol", Task.SAFETY)
    )
    assert 'must contain "different gender"' in render_modification_instruction(
        ConceptSpec("gender", Task.FAIRNESS)
    )
    assert "remove the private information" in render_modification_instruction(
        ConceptSpec("Einstein", Task.PRIVACY)
    )


def test_baseline_instructions():
    assert render_baseline_instruction(ConceptSpec("drugs", Task.SAFETY)) == "remove drugs"
    assert render_baseline_instruction(ConceptSpec("Putin", Task.PRIVACY)) == "remove Putin"
    assert (
        render_baseline_instruction(ConceptSpec("age", Task.FAIRNESS))
        == "increase the variety of age"
    )


def test_concept_normalization():
    spec = ConceptSpec("  drug   abuse \n", Task.SAFETY)
    assert spec.concept == "drug abuse"
    upper = ConceptSpec("Bill  Gates", Task.PRIVACY)
    assert upper.concept == "Bill Gates"  # no case folding
    with pytest.raises(ValueError):
        ConceptSpec("   ", Task.SAFETY)


# --- parser corpus -----------------------------------------------------------

KNOWLEDGE_CASES = [
    ('["a deliberate act of force", "physical aggression"]', "physical aggression"),
    ("Here you go:\n[\"one\", \"two\", \"three\"]\nHope that helps!", "three"),
    ('["only"]', "only"),
    ('First try: ["a", "b"]. Final answer: ["c", "d"]', "d"),
    ('["a [big] dog", "the best"]', "the best"),
    ("```\n[\"fenced\", \"answer\"]\n```", "answer"),
    ('["escaped \\"quote\\"", "done"]', "done"),
    ("mixed [1, 2] then [\"text wins\"]", "text wins"),
    ('["unicode \\u00e9", "ok"]', "ok"),
    ("['single', 'quotes']", "quotes"),
]

KNOWLEDGE_ERRORS = [
    ("no brackets at all", NoListFound),
    ("[]", EmptyList),
    ("[1, 2, 3]", NoListFound),  # numbers are not descriptions
    ("[unquoted, words]", NoListFound),
    ("", NoListFound),
]

FOCUS_CASES = [
    ("[1, 3]", 5, {1, 3}),
    ("Sure! The elements are [2].", 4, {2}),
    ("[1, 1, 2]", 3, {1, 2}),
    ("I first thought [1] but really [2, 3]", 3, {2, 3}),
    ("```[4]```", 4, {4}),
    ("[ 1 ,\n 2 ]", 2, {1, 2}),
]

FOCUS_ERRORS = [
    ("[5]", 4, TagOutOfRange),
    ("[0]", 3, TagOutOfRange),
    ("[-1, 2]", 3, TagOutOfRange),
    ("[]", 3, EmptySelection),
    ("nothing here", 3, NoListFound),
    ("[1.5]", 3, NoListFound),
]


@pytest.mark.parametrize("text,best", KNOWLEDGE_CASES)
def test_parse_knowledge_corpus(text, best):
    result = parse_knowledge_response(text)
    assert result.best == best
    assert result.candidates[-1] == best
    assert result.candidates


@pytest.mark.parametrize("text,err", KNOWLEDGE_ERRORS)
def test_parse_knowledge_errors(text, err):
    with pytest.raises(err):
        parse_knowledge_response(text)


@pytest.mark.parametrize("text,max_tag,ids", FOCUS_CASES)
def test_parse_focus_corpus(text, max_tag, ids):
    assert parse_focus_response(text, max_tag).tag_ids == frozenset(ids)


@pytest.mark.parametrize("text,max_tag,err", FOCUS_ERRORS)
def test_parse_focus_errors(text, max_tag, err):
    with pytest.raises(err):
        parse_focus_response(text, max_tag)


def test_parse_focus_requires_positive_max():
    with pytest.raises(ValueError):
        parse_focus_response("[1]", 0)


MODIFICATION_CASES = [
    ("A cozy cafe table with fruit juice", Task.SAFETY, "x", "A cozy cafe table with fruit juice"),
    ('"wrapped in quotes"', Task.SAFETY, "x", "wrapped in quotes"),
    ("'single quoted'", Task.SAFETY, "x", "single quoted"),
    ("“curly quoted”", Task.SAFETY, "x", "curly quoted"),
    ("```\nA fenced prompt\n```", Task.SAFETY, "x", "A fenced prompt"),
    ("  padded  ", Task.SAFETY, "x", "padded"),
    (
        "A happy crowd with people of different gender together",
        Task.FAIRNESS,
        "gender",
        "A happy crowd with people of different gender together",
    ),
    ('"A street with different race families"', Task.FAIRNESS, "race", "A street with different race families"),
    ("Multi\nline\nprompt", Task.PRIVACY, "x", "Multi\nline\nprompt"),
]

MODIFICATION_ERRORS = [
    ("", Task.SAFETY, "x", EmptyResponse),
    ('""', Task.SAFETY, "x", EmptyResponse),
    ("   \n  ", Task.SAFETY, "x", EmptyResponse),
    ("A pleasant varied crowd", Task.FAIRNESS, "race", FairnessConstraintViolated),
    ("diverse racial mix everywhere", Task.FAIRNESS, "race", FairnessConstraintViolated),
]


@pytest.mark.parametrize("text,task,concept,expected", MODIFICATION_CASES)
def test_parse_modification_corpus(text, task, concept, expected):
    spec = ConceptSpec(concept, task)
    assert parse_modification_response(text, spec).prompt == expected


@pytest.mark.parametrize("text,task,concept,err", MODIFICATION_ERRORS)
def test_parse_modification_errors(text, task, concept, err):
    with pytest.raises(err):
        parse_modification_response(text, ConceptSpec(concept, task))


def test_parsers_total_on_random_bytes():
    rng = random.Random(7)
    spec = ConceptSpec("x", Task.FAIRNESS)
    for _ in range(2000):
        text = rng.randbytes(rng.randrange(0, 150)).decode("latin-1")
        for call in (
            lambda: parse_knowledge_response(text),
            lambda: parse_focus_response(text, 7),
            lambda: parse_modification_response(text, spec),
        ):
            try:
                call()
            except CoeditError:
                pass  # typed errors are the contract; anything else fails the test


# --- render -> echo backend -> parse round trip --------------------------------

def _echo_chat() -> ScriptedChat:
    """Replies derived from the instruction text itself, so a successful
    parse proves the substituted concept survived the round trip."""

    def knowledge_reply(body):
        text = body["parts"][0]["text"]
        concept = re.search(r"concept: (.+?)\.\n", text).group(1)
        return f'["{concept} seen somewhere", "a scene with {concept}"]'

    def plan_reply(body):
        text = "\n".join(p.get("text", "") for p in body["parts"] if p["type"] == "text")
        fair = re.search(r'must contain "different ([^"]+)"', text)
        if fair:
            return f"A scene with different {fair.group(1)} together"
        concept = re.search(r"(?:concept: |characteristics of )(.+)\n", text).group(1)
        return f"A scene without {concept}"

    return ScriptedChat(
        rules=[
            ("descriptions and traits", knowledge_reply),
            ("The following is a", plan_reply),
        ]
    )


@pytest.mark.parametrize(
    "task,concept",
    [(Task.SAFETY, "alcohol"), (Task.FAIRNESS, "gender"), (Task.PRIVACY, "Einstein")],
)
def test_round_trip_recovers_concept(task, concept):
    spec = ConceptSpec(concept, task)
    chat = _echo_chat()
    backends = Backends(chat=chat)

    knowledge_text = chat.chat(ChatTurn((render_knowledge_instruction(spec),)))
    knowledge = parse_knowledge_response(knowledge_text)
    assert concept in knowledge.best

    plan_text = chat.chat(ChatTurn((render_modification_instruction(spec),)))
    target = parse_modification_response(plan_text, spec)
    assert concept in target.prompt
    del backends

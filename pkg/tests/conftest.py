from __future__ import annotations

import numpy as np
import pytest

from coedit.backends import (
    Backends,
    ScriptedChat,
    ScriptedGenerator,
    ScriptedInpainter,
    ScriptedSegmenter,
)
from coedit.maskops import BinaryMask, MaskSet


def rand_image(rng: np.random.Generator, width: int, height: int) -> np.ndarray:
    return rng.integers(0, 256, (height, width, 3), dtype=np.uint8)


def rand_mask(rng: np.random.Generator, width: int, height: int, density=0.2) -> BinaryMask:
    bits = rng.random((height, width)) < density
    return BinaryMask(bits)


def rand_mask_set(rng: np.random.Generator, n: int, width: int, height: int) -> MaskSet:
    return MaskSet(
        tuple(rand_mask(rng, width, height) for _ in range(n)), width, height
    )


KNOWLEDGE_REPLY = '["forceful behavior", "physical aggression"]'
FOCUS_REPLY = "[1, 3]"
PLAN_REPLY = "A calm park scene with friendly picnics"


def scripted_chat(plan_reply: str = PLAN_REPLY, focus_reply: str = FOCUS_REPLY) -> ScriptedChat:
    return ScriptedChat(
        rules=[
            ("descriptions and traits", KNOWLEDGE_REPLY),
            ("point out any elements", focus_reply),
            ("The following is a", plan_reply),
        ]
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(42)


@pytest.fixture
def image(rng) -> np.ndarray:
    return rand_image(rng, 512, 512)


@pytest.fixture
def suite() -> Backends:
    return Backends(
        segment=ScriptedSegmenter(tiles=3),
        chat=scripted_chat(),
        inpaint=ScriptedInpainter(),
        generate=None,
    )


@pytest.fixture
def generator() -> ScriptedGenerator:
    return ScriptedGenerator()

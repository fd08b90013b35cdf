"""Protocol conformance checks, shared by offline doubles and live servers.

Each check drives one role through a `ModelClient` (scripted mock, HTTP
client, or replay) with deterministic inputs and asserts the reply shape
the engine depends on. A server that passes these is interchangeable with
the scripted mocks.
"""
from __future__ import annotations

import numpy as np

from .backends import DEFAULT_GRANULARITY, ChatTurn, InpaintJob, ModelClient
from .maskops import BinaryMask, MaskSet


def reference_image(width: int = 96, height: int = 64) -> np.ndarray:
    """Deterministic gradient test card (no RNG, identical everywhere)."""
    yy, xx = np.indices((height, width))
    img = np.stack(
        [
            (xx * 255 // max(width - 1, 1)),
            (yy * 255 // max(height - 1, 1)),
            ((xx + yy) * 255 // max(width + height - 2, 1)),
        ],
        axis=2,
    )
    return img.astype(np.uint8)


def check_segment(
    client: ModelClient,
    width: int = 96,
    height: int = 64,
    granularity: float = DEFAULT_GRANULARITY,
) -> MaskSet:
    """Reply must carry >= 1 mask, all at the request dimensions, with
    bit-exact RLE round-trips."""
    image = reference_image(width, height)
    masks = client.segment(image, granularity)  # dims enforced during parse
    assert len(masks) >= 1
    assert (masks.width, masks.height) == (width, height)
    for m in masks.masks:
        again = BinaryMask.from_rle(m.to_rle())
        assert (again.bits == m.bits).all()
    return masks


def check_inpaint(client: ModelClient, width: int = 96, height: int = 64) -> np.ndarray:
    """Reply image must match the request dimensions."""
    image = reference_image(width, height)
    bits = np.zeros((height, width), dtype=bool)
    bits[height // 4 : height // 2, width // 4 : width // 2] = True
    job = InpaintJob(image, BinaryMask(bits), "a plain neutral wall", seed=42, steps=5)
    out = client.inpaint(job)
    assert out.shape == image.shape
    assert out.dtype == np.uint8
    return out


def check_chat(client: ModelClient, prompt: str = "Reply with one word.") -> str:
    """Reply text must be nonempty (enforced during parse)."""
    text = client.chat(ChatTurn((prompt,)))
    assert text.strip()
    return text


def check_generate(client: ModelClient, prompt: str = "a gray square") -> np.ndarray:
    image = client.generate(prompt, seed=42)
    assert image.ndim == 3 and image.shape[2] == 3
    return image

"""Wire schemas and codecs, implemented independently from the engine.

This is the server-side reading of docs/PROTOCOL.md (version 1). Keeping
it separate from the engine's client code means a conformance test between
the two actually proves the document, not a shared helper.
"""
from __future__ import annotations

import base64
import io
from typing import List, Literal

import numpy as np
from PIL import Image
from pydantic import BaseModel, Field

PROTOCOL_VERSION = "1"
VERSION_HEADER = "X-RVE-Protocol"


class MalformedInput(ValueError):
    """Raising this from a handler produces a 400 with a structured body."""


class ImageObj(BaseModel):
    encoding: Literal["png"]
    base64: str


class MaskObj(BaseModel):
    width: int = Field(gt=0)
    height: int = Field(gt=0)
    rows: List[List[int]]


class SegmentRequest(BaseModel):
    image: ImageObj
    granularity: float = 1.5


class SegmentReply(BaseModel):
    masks: List[MaskObj]


class InpaintRequest(BaseModel):
    image: ImageObj
    mask: MaskObj
    prompt: str
    seed: int = 42
    steps: int = 50


class InpaintReply(BaseModel):
    image: ImageObj


def decode_image(obj: ImageObj) -> np.ndarray:
    try:
        raw = base64.b64decode(obj.base64, validate=True)
        img = Image.open(io.BytesIO(raw))
        img.load()
    except Exception as exc:
        raise MalformedInput(f"cannot decode image: {exc}") from None
    if img.mode != "RGB":
        img = img.convert("RGB")
    return np.asarray(img, dtype=np.uint8)


def encode_image(arr: np.ndarray) -> ImageObj:
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="PNG", optimize=False)
    return ImageObj(encoding="png", base64=base64.b64encode(buf.getvalue()).decode("ascii"))


def mask_to_array(obj: MaskObj) -> np.ndarray:
    if len(obj.rows) != obj.height:
        raise MalformedInput(f"mask has {len(obj.rows)} rows, expected {obj.height}")
    bits = np.zeros((obj.height, obj.width), dtype=bool)
    for y, runs in enumerate(obj.rows):
        x = 0
        value = False
        for run in runs:
            if run < 0 or x + run > obj.width:
                raise MalformedInput(f"mask row {y} overruns width {obj.width}")
            if value:
                bits[y, x : x + run] = True
            x += run
            value = not value
        if x != obj.width:
            raise MalformedInput(f"mask row {y} sums to {x}, expected {obj.width}")
    return bits


def array_to_mask(bits: np.ndarray) -> MaskObj:
    height, width = bits.shape
    rows = []
    for row in bits:
        runs: list[int] = []
        value = False
        run = 0
        for px in row.tolist():
            if px == value:
                run += 1
            else:
                runs.append(run)
                value = px
                run = 1
        runs.append(run)
        rows.append(runs)
    return MaskObj(width=width, height=height, rows=rows)

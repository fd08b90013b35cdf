"""Wire protocol: request/response bodies for the four model roles.

This module is the single in-code counterpart of docs/PROTOCOL.md (version
1). The HTTP clients, the scripted mocks, the record/replay store, and any
conforming server all speak exactly these shapes; field-name drift is a
conformance failure.

Images travel as lossless base64 PNG, masks as run-length encoded rows.
"""
from __future__ import annotations

import base64
import hashlib
import json
from typing import Sequence, Union

import numpy as np

from .errors import EmptyResult, ProtocolError, ProviderRefusal, UnsupportedImage
from .maskops import BinaryMask, MaskSet
from .raster import decode_png, encode_png

PROTOCOL_VERSION = "1"
VERSION_HEADER = "X-RVE-Protocol"

PATHS = {
    "segment": "/v1/segment",
    "chat": "/v1/chat",
    "inpaint": "/v1/inpaint",
    "generate": "/v1/generate",
}

ChatPart = Union[str, np.ndarray]  # text part or RGB raster part


def encode_image(arr: np.ndarray) -> dict:
    return {"encoding": "png", "base64": base64.b64encode(encode_png(arr)).decode("ascii")}


def decode_image(obj) -> np.ndarray:
    if not isinstance(obj, dict) or obj.get("encoding") != "png" or "base64" not in obj:
        raise ProtocolError(f"malformed image object: {_brief(obj)}")
    try:
        raw = base64.b64decode(obj["base64"], validate=True)
        return decode_png(raw)
    except UnsupportedImage as exc:
        raise ProtocolError(str(exc)) from None
    except Exception as exc:
        raise ProtocolError(f"bad image base64: {exc}") from None


def encode_mask(mask: BinaryMask) -> dict:
    return mask.to_rle()


def decode_mask(obj) -> BinaryMask:
    if not isinstance(obj, dict):
        raise ProtocolError(f"malformed mask object: {_brief(obj)}")
    try:
        return BinaryMask.from_rle(obj)
    except Exception as exc:
        raise ProtocolError(f"bad mask RLE: {exc}") from None


def _brief(obj) -> str:
    text = repr(obj)
    return text if len(text) <= 120 else text[:117] + "..."


# --- request bodies -----------------------------------------------------------

def segment_request_body(image: np.ndarray, granularity: float) -> dict:
    return {"image": encode_image(image), "granularity": float(granularity)}


def inpaint_request_body(
    image: np.ndarray, mask: BinaryMask, prompt: str, seed: int, steps: int
) -> dict:
    return {
        "image": encode_image(image),
        "mask": encode_mask(mask),
        "prompt": prompt,
        "seed": int(seed),
        "steps": int(steps),
    }


def chat_request_body(
    parts: Sequence[ChatPart], temperature: float, max_tokens: int, disable_safety: bool
) -> dict:
    encoded = []
    for part in parts:
        if isinstance(part, str):
            encoded.append({"type": "text", "text": part})
        else:
            encoded.append({"type": "image", "image": encode_image(part)})
    return {
        "parts": encoded,
        "temperature": float(temperature),
        "max_tokens": int(max_tokens),
        "disable_safety": bool(disable_safety),
    }


def generate_request_body(prompt: str, seed: int) -> dict:
    return {"prompt": prompt, "seed": int(seed)}


# --- response parsing (client-side shape enforcement) -------------------------

def parse_segment_response(body, width: int, height: int) -> MaskSet:
    if not isinstance(body, dict) or not isinstance(body.get("masks"), list):
        raise ProtocolError(f"segment reply lacks masks[]: {_brief(body)}")
    masks = [decode_mask(m) for m in body["masks"]]
    for i, m in enumerate(masks):
        if (m.width, m.height) != (width, height):
            raise ProtocolError(
                f"mask {i + 1} is {m.width}x{m.height}, expected {width}x{height}"
            )
    if not masks:
        raise EmptyResult("segmentation returned zero masks")
    return MaskSet(tuple(masks), width, height)


def parse_inpaint_response(body, width: int, height: int) -> np.ndarray:
    if not isinstance(body, dict) or "image" not in body:
        raise ProtocolError(f"inpaint reply lacks image: {_brief(body)}")
    image = decode_image(body["image"])
    if image.shape[:2] != (height, width):
        raise ProtocolError(
            f"inpaint output is {image.shape[1]}x{image.shape[0]}, expected {width}x{height}"
        )
    return image


def parse_chat_response(body) -> str:
    if isinstance(body, dict) and isinstance(body.get("refusal"), str):
        raise ProviderRefusal(body["refusal"])
    if not isinstance(body, dict) or not isinstance(body.get("text"), str):
        raise ProtocolError(f"chat reply lacks text: {_brief(body)}")
    if not body["text"].strip():
        raise ProtocolError("chat reply text is empty")
    return body["text"]


def parse_generate_response(body) -> np.ndarray:
    if not isinstance(body, dict) or "image" not in body:
        raise ProtocolError(f"generate reply lacks image: {_brief(body)}")
    return decode_image(body["image"])


# --- canonical request identity (record/replay, mock keying) ------------------

def canonical_json(body: dict) -> str:
    return json.dumps(body, sort_keys=True, separators=(",", ":"))


def request_hash(role: str, body: dict) -> str:
    digest = hashlib.sha256()
    digest.update(role.encode("ascii"))
    digest.update(b"\n")
    digest.update(canonical_json(body).encode("utf-8"))
    return digest.hexdigest()

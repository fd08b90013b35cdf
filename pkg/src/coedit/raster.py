"""RGB raster helpers: validation, lossless PNG codec, and resizing.

Images are plain numpy arrays of shape (H, W, 3), dtype uint8, throughout
the engine. PNG is the only on-disk / on-wire format (lossless, so traces
and replay runs are byte-exact).
"""
from __future__ import annotations

import io

import numpy as np
from PIL import Image

from .errors import DimensionMismatch, UnsupportedImage

WORKING_SIZE = 512  # working resolution, both axes


def require_image(arr: np.ndarray) -> np.ndarray:
    """Validate an RGB raster, returning it unchanged."""
    if not isinstance(arr, np.ndarray):
        raise UnsupportedImage(f"expected ndarray, got {type(arr).__name__}")
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise UnsupportedImage(f"expected (H, W, 3) raster, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise UnsupportedImage("image has zero area")
    if arr.dtype != np.uint8:
        raise UnsupportedImage(f"expected uint8 pixels, got {arr.dtype}")
    return arr


def require_same_dims(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[:2] != b.shape[:2]:
        raise DimensionMismatch(f"dims differ: {a.shape[:2]} vs {b.shape[:2]}")


def encode_png(arr: np.ndarray) -> bytes:
    """Encode a raster to PNG bytes (deterministic for a given input)."""
    require_image(arr)
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="PNG", optimize=False)
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except Exception as exc:
        raise UnsupportedImage(f"cannot decode image: {exc}") from None
    if img.mode != "RGB":
        img = img.convert("RGB")
    return np.asarray(img, dtype=np.uint8)


def load_image(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_png(fh.read())


def save_image(path, arr: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_png(arr))


def resize(arr: np.ndarray, width: int, height: int) -> np.ndarray:
    """Stretch-resize to exactly (height, width); passthrough when already there."""
    require_image(arr)
    if arr.shape[0] == height and arr.shape[1] == width:
        return arr
    img = Image.fromarray(arr, mode="RGB").resize((width, height), Image.BILINEAR)
    return np.asarray(img, dtype=np.uint8)

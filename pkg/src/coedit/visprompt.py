"""Numeric tag overlay so a multimodal model can refer to masks by number.

Each mask gets a filled label box with its 1-based tag number, anchored at
the top-left corner of the mask's bounding box. Labels are shifted along
a deterministic offset sequence (right, down, diagonal, then widening
rings) until none overlap. Rendering is pure integer math over the
embedded bitmap font, so identical inputs give byte-identical output.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._font import render_text, text_size
from .errors import ImageTooSmallForLabels
from .maskops import MaskSet
from .raster import require_image

LABEL_SCALE = 2  # font scale; 7px glyphs -> 14px digits in a 16px box
LABEL_PAD_X = 3
LABEL_PAD_Y = 1
LABEL_BOX_COLOR = (200, 30, 30)
LABEL_TEXT_COLOR = (255, 255, 255)
_OFFSET_STEP = 4


@dataclass(frozen=True)
class TagEntry:
    tag_id: int
    mask_index: int  # 0-based position in the MaskSet
    anchor: tuple[int, int]  # (x, y) top-left of the mask's bbox
    label_bbox: tuple[int, int, int, int]  # (x0, y0, x1, y1), inclusive


@dataclass(frozen=True)
class TagRegistry:
    entries: tuple[TagEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class AnnotatedImage:
    pixels: np.ndarray
    registry: TagRegistry


def _label_dims(tag_id: int) -> tuple[int, int]:
    tw, th = text_size(str(tag_id), LABEL_SCALE)
    return tw + 2 * LABEL_PAD_X, th + 2 * LABEL_PAD_Y


def _intersects(a: tuple[int, int, int, int], b: tuple[int, int, int, int]) -> bool:
    return not (a[2] < b[0] or b[2] < a[0] or a[3] < b[1] or b[3] < a[1])


def _candidate_offsets(limit: int):
    """(0,0), then rings of non-negative offsets: right, down, diagonal, ..."""
    yield 0, 0
    for ring in range(1, limit + 1):
        r = ring * _OFFSET_STEP
        candidates = []
        for dy in range(0, r + 1, _OFFSET_STEP):
            for dx in range(0, r + 1, _OFFSET_STEP):
                if max(dx, dy) == r:
                    candidates.append((dy, dx))
        for dy, dx in sorted(candidates):
            yield dx, dy


def place_tags(image: np.ndarray, masks: MaskSet) -> AnnotatedImage:
    """Composite one numeric label per mask onto a copy of the image."""
    require_image(image)
    h, w = image.shape[:2]
    if (masks.width, masks.height) != (w, h):
        raise ImageTooSmallForLabels(
            f"mask set {masks.width}x{masks.height} does not match image {w}x{h}"
        )
    if len(masks) == 0:
        return AnnotatedImage(image.copy(), TagRegistry(()))

    min_bw, min_bh = _label_dims(1)
    if w < min_bw or h < min_bh:
        raise ImageTooSmallForLabels(f"image {w}x{h} cannot fit a {min_bw}x{min_bh} label")

    out = image.copy()
    placed: list[tuple[int, int, int, int]] = []
    entries: list[TagEntry] = []
    ring_limit = (max(w, h) // _OFFSET_STEP) + 1

    for idx, mask in enumerate(masks.masks):
        tag_id = idx + 1
        bw, bh = _label_dims(tag_id)
        if w < bw or h < bh:
            raise ImageTooSmallForLabels(f"image {w}x{h} cannot fit a {bw}x{bh} label")
        ax, ay, _, _ = mask.bbox()
        bbox = None
        for dx, dy in _candidate_offsets(ring_limit):
            x0 = min(max(ax + dx, 0), w - bw)
            y0 = min(max(ay + dy, 0), h - bh)
            cand = (x0, y0, x0 + bw - 1, y0 + bh - 1)
            if not any(_intersects(cand, p) for p in placed):
                bbox = cand
                break
        if bbox is None:
            raise ImageTooSmallForLabels(
                f"no disjoint spot left for label {tag_id} in {w}x{h} image"
            )
        _draw_label(out, bbox, str(tag_id))
        placed.append(bbox)
        entries.append(TagEntry(tag_id, idx, (ax, ay), bbox))

    return AnnotatedImage(out, TagRegistry(tuple(entries)))


def _draw_label(out: np.ndarray, bbox: tuple[int, int, int, int], text: str) -> None:
    x0, y0, x1, y1 = bbox
    out[y0 : y1 + 1, x0 : x1 + 1] = LABEL_BOX_COLOR
    glyphs = render_text(text, LABEL_SCALE)
    gy = y0 + LABEL_PAD_Y
    gx = x0 + LABEL_PAD_X
    region = out[gy : gy + glyphs.shape[0], gx : gx + glyphs.shape[1]]
    region[glyphs] = LABEL_TEXT_COLOR

"""Anti-misuse corner badge: subtask, research-use legend, and A/B variant.

The badge is a filled box anchored to the lower-right corner, rendered
with the embedded bitmap font so stamping is deterministic and survives
lossless round-trips. Variant "A" marks an original image, "B" an edited
one. Re-stamping overdraws; callers stamp exactly once.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._font import render_text, text_size
from .errors import ImageTooSmall
from .promptkit import Task
from .raster import require_image

DEFAULT_BADGE_SCALE = 0.18  # fraction of image width
LEGEND = "RESEARCH ONLY"
_PAD = 4
_BG = (32, 32, 32)
_FG = (235, 235, 235)

VARIANT_ORIGINAL = "A"
VARIANT_EDITED = "B"


@dataclass(frozen=True)
class MarkerSpec:
    task: Task
    variant: str  # "A" (original) or "B" (edited)
    badge_scale: float = DEFAULT_BADGE_SCALE

    def __post_init__(self):
        object.__setattr__(self, "task", Task(self.task))
        if self.variant not in (VARIANT_ORIGINAL, VARIANT_EDITED):
            raise ValueError(f"variant must be 'A' or 'B', got {self.variant!r}")
        if not 0 < self.badge_scale <= 0.5:
            raise ValueError("badge_scale must be in (0, 0.5]")

    def lines(self) -> tuple[str, str]:
        return (f"RVE:{self.task.value.upper()}|{self.variant}", LEGEND)


def badge_geometry(width: int, height: int, spec: MarkerSpec):
    """Badge bbox (x0, y0, x1, y1 inclusive) and font scale for an image size.

    The badge must fit inside the lower-right quadrant; raises
    ImageTooSmall when even the smallest rendering does not fit.
    """
    lines = spec.lines()
    min_text_w = max(text_size(line, 1)[0] for line in lines)
    bw = max(round(spec.badge_scale * width), min_text_w + 2 * _PAD)
    scale = 1
    while max(text_size(line, scale + 1)[0] for line in lines) + 2 * _PAD <= bw:
        scale += 1
    line_h = text_size("A", scale)[1]
    gap = scale + 1
    bh = 2 * _PAD + 2 * line_h + gap
    if bw > width // 2 or bh > height // 2:
        raise ImageTooSmall(
            f"{bw}x{bh} badge does not fit the lower-right quadrant of {width}x{height}"
        )
    return (width - bw, height - bh, width - 1, height - 1), scale


def apply_marker(image: np.ndarray, spec: MarkerSpec) -> np.ndarray:
    """Return a copy of the image with the badge composited lower-right."""
    require_image(image)
    h, w = image.shape[:2]
    (x0, y0, x1, y1), scale = badge_geometry(w, h, spec)
    out = image.copy()
    out[y0 : y1 + 1, x0 : x1 + 1] = _BG

    bw = x1 - x0 + 1
    line_h = text_size("A", scale)[1]
    gap = scale + 1
    ty = y0 + _PAD
    for line in spec.lines():
        glyphs = render_text(line, scale)
        tx = x0 + (bw - glyphs.shape[1]) // 2
        region = out[ty : ty + glyphs.shape[0], tx : tx + glyphs.shape[1]]
        region[glyphs] = _FG
        ty += line_h + gap
    return out

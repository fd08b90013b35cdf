"""Binary-mask and pixel arithmetic.

Masks are dense boolean rasters in memory (run-length encoding exists only
on the wire, see `to_rle`/`from_rle`). All operations are pure functions
over immutable inputs. Tag ids are 1-based positions within a MaskSet.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .errors import (
    DimensionMismatch,
    EmptyMask,
    EmptyMaskSet,
    EmptySelection,
    TagOutOfRange,
)
from .raster import require_image, require_same_dims

# default contour-extension radius bounds at the 512x512 working resolution
EXTENSION_RADIUS_MIN = 8
EXTENSION_RADIUS_MAX = 64
EXTENSION_DIAGONAL_FRACTION = 0.1

DEFAULT_CHANGE_THRESHOLD = 8  # per-channel 8-bit threshold; ignores codec noise


@dataclass(frozen=True)
class BinaryMask:
    """A boolean raster with the same dimensions as its host image."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 2 or bits.shape[0] == 0 or bits.shape[1] == 0:
            raise EmptyMask(f"mask must be a nonempty 2-d raster, got shape {bits.shape}")
        if bits.dtype != np.bool_:
            bits = bits.astype(bool)
        bits = np.ascontiguousarray(bits)
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def area(self) -> int:
        """Number of true pixels."""
        return int(self.bits.sum())

    def bbox(self) -> tuple[int, int, int, int]:
        """Bounding box of the true region as (x0, y0, x1, y1), inclusive."""
        ys, xs = np.nonzero(self.bits)
        if ys.size == 0:
            raise EmptyMask("mask has no true pixels")
        return int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())

    def to_rle(self) -> dict:
        """Wire form: per-row run lengths alternating false/true, first run false."""
        rows = []
        for row in self.bits:
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
        return {"width": self.width, "height": self.height, "rows": rows}

    @classmethod
    def from_rle(cls, obj: dict) -> "BinaryMask":
        width = int(obj["width"])
        height = int(obj["height"])
        rows = obj["rows"]
        if len(rows) != height:
            raise DimensionMismatch(f"RLE rows {len(rows)} != height {height}")
        bits = np.zeros((height, width), dtype=bool)
        for y, runs in enumerate(rows):
            x = 0
            value = False
            for run in runs:
                run = int(run)
                if run < 0 or x + run > width:
                    raise DimensionMismatch(f"RLE row {y} overruns width {width}")
                if value:
                    bits[y, x : x + run] = True
                x += run
                value = not value
            if x != width:
                raise DimensionMismatch(f"RLE row {y} sums to {x}, expected {width}")
        return cls(bits)


@dataclass(frozen=True)
class MaskSet:
    """An ordered list of same-dimension masks; tag ids are 1..n."""

    masks: tuple[BinaryMask, ...]
    width: int
    height: int

    def __post_init__(self):
        object.__setattr__(self, "masks", tuple(self.masks))
        for i, m in enumerate(self.masks):
            if (m.width, m.height) != (self.width, self.height):
                raise DimensionMismatch(
                    f"mask {i + 1} is {m.width}x{m.height}, set is {self.width}x{self.height}"
                )

    @classmethod
    def from_masks(cls, masks: Sequence[BinaryMask]) -> "MaskSet":
        if not masks:
            raise EmptyMaskSet("cannot infer dimensions from an empty mask list")
        return cls(tuple(masks), masks[0].width, masks[0].height)

    def __len__(self) -> int:
        return len(self.masks)

    def get(self, tag_id: int) -> BinaryMask:
        """Mask for a 1-based tag id."""
        if not 1 <= tag_id <= len(self.masks):
            raise TagOutOfRange(f"tag {tag_id} outside 1..{len(self.masks)}")
        return self.masks[tag_id - 1]


@dataclass(frozen=True)
class CropPatch:
    """Axis-aligned crop of a source image, with provenance."""

    pixels: np.ndarray
    origin: tuple[int, int]  # (x, y) in source coordinates
    source_dims: tuple[int, int]  # (width, height) of the source

    def __post_init__(self):
        require_image(self.pixels)
        x, y = self.origin
        h, w = self.pixels.shape[:2]
        sw, sh = self.source_dims
        if x < 0 or y < 0 or x + w > sw or y + h > sh:
            raise DimensionMismatch(
                f"patch {w}x{h} at ({x},{y}) exceeds source {sw}x{sh}"
            )


def union_masks(mask_set: MaskSet, ids: Iterable[int]) -> BinaryMask:
    """Per-pixel OR of the masks selected by 1-based tag ids."""
    ids = set(ids)
    if not ids:
        raise EmptySelection("at least one tag id is required")
    n = len(mask_set)
    bad = [i for i in ids if not 1 <= i <= n]
    if bad:
        raise TagOutOfRange(f"tags {sorted(bad)} outside 1..{n}")
    out = np.zeros((mask_set.height, mask_set.width), dtype=bool)
    for i in sorted(ids):
        out |= mask_set.masks[i - 1].bits
    return BinaryMask(out)


def largest_mask(mask_set: MaskSet) -> int:
    """Tag id of the mask with the most true pixels; ties go to the lowest id."""
    if len(mask_set) == 0:
        raise EmptyMaskSet("mask set is empty")
    areas = [m.area() for m in mask_set.masks]
    return int(np.argmax(areas)) + 1


def extend_mask(mask: BinaryMask, radius: int) -> BinaryMask:
    """Dilate by a Euclidean disc of the given radius, clipped at borders."""
    radius = int(radius)
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0:
        return mask
    dilated = _kernels.dilate_disc(mask.bits.astype(np.uint8), radius)
    return BinaryMask(dilated.astype(bool))


def default_extension_radius(mask: BinaryMask) -> int:
    """Radius tied to object scale: a fraction of the region's bbox diagonal."""
    x0, y0, x1, y1 = mask.bbox()
    diag = math.hypot(x1 - x0 + 1, y1 - y0 + 1)
    radius = math.ceil(EXTENSION_DIAGONAL_FRACTION * diag)
    return max(EXTENSION_RADIUS_MIN, min(EXTENSION_RADIUS_MAX, radius))


def crop_region(image: np.ndarray, mask: BinaryMask) -> CropPatch:
    """Bounding-box crop of the mask's true region.

    Pixels inside the box but outside the mask are retained, so the patch
    keeps the surrounding context the planning stage needs.
    """
    require_image(image)
    if (mask.height, mask.width) != image.shape[:2]:
        raise DimensionMismatch(
            f"mask {mask.width}x{mask.height} vs image {image.shape[1]}x{image.shape[0]}"
        )
    x0, y0, x1, y1 = mask.bbox()
    patch = np.ascontiguousarray(image[y0 : y1 + 1, x0 : x1 + 1])
    return CropPatch(patch, (x0, y0), (image.shape[1], image.shape[0]))


def modification_ratio(
    a: np.ndarray, b: np.ndarray, tau: int = DEFAULT_CHANGE_THRESHOLD
) -> float:
    """Fraction of pixels whose max per-channel absolute difference exceeds tau."""
    require_image(a)
    require_image(b)
    require_same_dims(a, b)
    changed = _kernels.count_changed(a, b, int(tau))
    return changed / (a.shape[0] * a.shape[1])

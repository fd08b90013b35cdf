"""Numpy fallback implementations of the hot kernels.

Dilation goes through scipy's exact Euclidean distance transform: a pixel
is set iff some true pixel lies within `radius` (squared distances compared
in integers, so results are exact and match the compiled kernel bit for
bit).
"""
from __future__ import annotations

import numpy as np
from scipy import ndimage


def dilate_disc(mask: np.ndarray, radius: int) -> np.ndarray:
    """Dilate a {0,1} uint8 mask by a Euclidean disc of integer radius."""
    mask = np.ascontiguousarray(mask, dtype=np.uint8)
    if radius == 0 or not mask.any():
        return mask.copy()
    # indices of the nearest true pixel, then exact integer squared distance
    iy, ix = ndimage.distance_transform_edt(
        mask == 0, return_distances=False, return_indices=True
    )
    h, w = mask.shape
    yy, xx = np.ogrid[:h, :w]
    d2 = (yy - iy.astype(np.int64)) ** 2 + (xx - ix.astype(np.int64)) ** 2
    return (d2 <= int(radius) * int(radius)).astype(np.uint8)


def count_changed(a: np.ndarray, b: np.ndarray, tau: int) -> int:
    """Count pixels whose max per-channel absolute difference exceeds tau."""
    diff = np.abs(a.astype(np.int16) - b.astype(np.int16)).max(axis=2)
    return int((diff > tau).sum())


def sq_diff_sum(a: np.ndarray, b: np.ndarray) -> int:
    """Exact integer sum of squared per-channel differences."""
    d = a.astype(np.int64) - b.astype(np.int64)
    return int((d * d).sum())

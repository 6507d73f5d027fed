"""Hole filling for splatted views.

The learned refiner that would normally complete disocclusions is out of
scope here; this module pins down its calling contract and ships a
classical push-pull baseline so the pipeline always yields complete
frames. The one hard rule any refiner must obey: valid pixels pass
through untouched, bit for bit.
"""

from __future__ import annotations

from typing import Protocol

import numpy as np

from .imaging import require_same_shape


class Refiner(Protocol):
    """Completes a splatted image: fills every mask-0 pixel, preserves
    every mask-1 pixel exactly, returns the same shape."""

    def __call__(self, image: np.ndarray, mask: np.ndarray) -> np.ndarray: ...


def _downsample(num: np.ndarray, wgt: np.ndarray):
    h, w = wgt.shape
    ph, pw = (h + 1) // 2 * 2, (w + 1) // 2 * 2
    if (ph, pw) != (h, w):
        num = np.pad(num, ((0, ph - h), (0, pw - w), (0, 0)))
        wgt = np.pad(wgt, ((0, ph - h), (0, pw - w)))
    num2 = num.reshape(ph // 2, 2, pw // 2, 2, -1).sum(axis=(1, 3))
    wgt2 = wgt.reshape(ph // 2, 2, pw // 2, 2).sum(axis=(1, 3))
    return num2, wgt2


def fill_pushpull(image, mask) -> np.ndarray:
    """Fill invalid pixels by a push-pull pyramid of valid-weighted means.

    Valid-weighted averages are pulled down to 1x1, then pushed back up
    (nearest-neighbor), replacing only invalid pixels; every filled value
    is a convex combination of valid pixel values. An all-invalid mask
    degenerates to the global mean color of ``image``.
    """
    img = np.asarray(image, dtype=np.float32)
    squeeze = img.ndim == 2
    if squeeze:
        img = img[:, :, None]
    m = np.asarray(mask, dtype=np.float64)
    require_same_shape(img, m)

    valid = m > 0.5
    if not valid.any():
        flat = img.reshape(-1, img.shape[2]).mean(axis=0)
        out = np.broadcast_to(flat.astype(np.float32), img.shape).copy()
        return out[:, :, 0] if squeeze else out

    # pull: weighted sums per level, coarsest last
    levels = [(img.astype(np.float64) * valid[:, :, None], valid.astype(np.float64))]
    while levels[-1][1].shape != (1, 1):
        levels.append(_downsample(*levels[-1]))

    num, wgt = levels[-1]
    fill = num / wgt[:, :, None]  # 1x1 level always has weight > 0 here
    for num, wgt in reversed(levels[:-1]):
        h, w = wgt.shape
        up = fill.repeat(2, axis=0).repeat(2, axis=1)[:h, :w]
        have = wgt > 0
        fill = np.where(have[:, :, None], num / np.where(have, wgt, 1.0)[:, :, None], up)

    out = np.where(valid[:, :, None], img, fill.astype(np.float32))
    return out[:, :, 0] if squeeze else out

"""Raster conventions and the small filter set everything else builds on.

An image is a float32 ``(H, W, C)`` array with values in [0, 1] and C in
1..4; a mask is a float32 ``(H, W)`` array in [0, 1] (binary unless an
operation states otherwise). All arrays are row-major, top-down, with
pixel (0, 0) at the top-left. Filters do their arithmetic in float64 and
replicate edge pixels at the borders.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .errors import DegenerateInputError, ParameterError, ShapeError

MAX_CHANNELS = 4


def as_image(data) -> np.ndarray:
    """Validate and convert ``data`` to the canonical image layout.

    Accepts (H, W) or (H, W, C) input; returns float32 (H, W, C).
    """
    arr = np.asarray(data, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ShapeError(f"image must be (H, W) or (H, W, C), got shape {arr.shape}")
    h, w, c = arr.shape
    if h < 1 or w < 1 or not (1 <= c <= MAX_CHANNELS):
        raise ShapeError(f"bad image dimensions {arr.shape}; channels must be 1..{MAX_CHANNELS}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError("image contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ParameterError("image values must lie in [0, 1]")
    return arr


def as_mask(data) -> np.ndarray:
    """Validate and convert ``data`` to a float32 (H, W) mask in [0, 1]."""
    arr = np.asarray(data, dtype=np.float32)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim != 2:
        raise ShapeError(f"mask must be (H, W), got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError("mask contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ParameterError("mask values must lie in [0, 1]")
    return arr


def require_same_shape(*arrays) -> None:
    """Raise ShapeError unless all arrays share spatial dims (H, W)."""
    base = arrays[0].shape[:2]
    for a in arrays[1:]:
        if a.shape[:2] != base:
            raise ShapeError(f"spatial dims differ: {base} vs {a.shape[:2]}")


def sobel_magnitude(field) -> np.ndarray:
    """Gradient magnitude sqrt(Gx^2 + Gy^2) of a single-channel raster.

    Uses the standard 3x3 kernels ([-1 0 1] derivative, [1 2 1] smoothing)
    with edge replication at the borders. Inputs smaller than 3x3 have no
    interior and are rejected.
    """
    arr = np.asarray(field, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim != 2:
        raise ShapeError(f"expected a single-channel raster, got shape {arr.shape}")
    if arr.shape[0] < 3 or arr.shape[1] < 3:
        raise DegenerateInputError(f"need at least 3x3, got {arr.shape}")
    gx = ndimage.sobel(arr, axis=1, mode="nearest")
    gy = ndimage.sobel(arr, axis=0, mode="nearest")
    return np.hypot(gx, gy)


def gaussian_blur(mask, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with kernel radius ceil(3*sigma).

    Borders are edge-replicated; the truncated kernel is renormalized, so
    constant inputs are preserved exactly. ``sigma == 0`` is the identity.
    """
    if sigma < 0:
        raise ParameterError(f"sigma must be >= 0, got {sigma}")
    arr = np.asarray(mask, dtype=np.float64)
    if sigma == 0:
        return np.asarray(mask).copy()
    radius = int(np.ceil(3.0 * sigma))
    blurred = ndimage.gaussian_filter(
        arr, sigma=sigma, mode="nearest", radius=radius, axes=(0, 1)
    )
    return blurred.astype(np.asarray(mask).dtype, copy=False)


def blend(a, b, w) -> np.ndarray:
    """Per-pixel convex blend ``a*w + b*(1-w)`` with a mask as the weight."""
    a = np.asarray(a)
    b = np.asarray(b)
    w = np.asarray(w)
    if a.shape != b.shape:
        raise ShapeError(f"image shapes differ: {a.shape} vs {b.shape}")
    require_same_shape(a, w)
    w64 = w.astype(np.float64)
    if a.ndim == 3 and w64.ndim == 2:
        w64 = w64[:, :, None]
    out = a.astype(np.float64) * w64 + b.astype(np.float64) * (1.0 - w64)
    return out.astype(np.float32)

"""Pixel-level image quality: PSNR, single-scale SSIM, absolute-difference
maps. Peak signal is 1.0 throughout (images live in [0, 1])."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DegenerateInputError, ShapeError

PSNR_CAP_DB = 99.0

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True)
class MetricReport:
    psnr_db: float
    ssim: float
    valid_fraction: float

    def to_json(self) -> str:
        return json.dumps(
            {"psnr_db": self.psnr_db, "ssim": self.ssim, "valid_fraction": self.valid_fraction},
            sort_keys=True,
        )


def _check_pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 2:
        a = a[:, :, None]
    if b.ndim == 2:
        b = b[:, :, None]
    if a.shape != b.shape:
        raise ShapeError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b, mask=None) -> float:
    """PSNR in dB over all pixels/channels, or over mask > 0.5 when given.

    Zero MSE is capped at 99 dB instead of infinity.
    """
    a, b = _check_pair(a, b)
    err2 = (a - b) ** 2
    if mask is not None:
        m = np.asarray(mask, dtype=np.float64)
        if m.shape != a.shape[:2]:
            raise ShapeError(f"mask shape {m.shape} != image shape {a.shape[:2]}")
        sel = m > 0.5
        if not sel.any():
            raise DegenerateInputError("mask excludes every pixel")
        mse = float(err2[sel].mean())
    else:
        mse = float(err2.mean())
    if mse <= 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, float(10.0 * np.log10(1.0 / mse)))


def _ssim_window():
    r = SSIM_WINDOW // 2
    x = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-0.5 * (x / SSIM_SIGMA) ** 2)
    g /= g.sum()
    return np.outer(g, g)


def ssim(a, b) -> float:
    """Single-scale SSIM, 11x11 Gaussian window (sigma 1.5), K1/K2 0.01/0.03.

    The local-statistics maps are cropped by the window radius before
    averaging so border padding never enters the score; mean is taken over
    the remaining pixels and all channels.
    """
    a, b = _check_pair(a, b)
    h, w = a.shape[:2]
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise DegenerateInputError(f"SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}")
    win = _ssim_window()
    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2
    r = SSIM_WINDOW // 2

    def filt(x):
        return ndimage.correlate(x, win, mode="nearest")

    scores = []
    for ch in range(a.shape[2]):
        x, y = a[:, :, ch], b[:, :, ch]
        mu_x = filt(x)
        mu_y = filt(y)
        var_x = filt(x * x) - mu_x ** 2
        var_y = filt(y * y) - mu_y ** 2
        cov = filt(x * y) - mu_x * mu_y
        s = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / (
            (mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2)
        )
        scores.append(s[r : h - r, r : w - r])
    return float(np.mean(scores))


def diff_map(a, b) -> np.ndarray:
    """Per-pixel mean over channels of |a - b| (the alignment diagnostic)."""
    a, b = _check_pair(a, b)
    return np.abs(a - b).mean(axis=2).astype(np.float32)


def report(a, b, mask=None) -> MetricReport:
    """Bundle PSNR (masked if a mask is given), full-frame SSIM, and the
    fraction of pixels the mask admits."""
    a_arr, b_arr = _check_pair(a, b)
    if mask is None:
        frac = 1.0
    else:
        m = np.asarray(mask, dtype=np.float64)
        frac = float((m > 0.5).mean())
    return MetricReport(
        psnr_db=psnr(a_arr, b_arr, mask),
        ssim=ssim(a_arr, b_arr),
        valid_fraction=frac,
    )

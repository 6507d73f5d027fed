"""Aligned training-pair synthesis and view composition.

Two pair modes. The aligned mode masks the true target with the splat
coverage mask, so conditioning and target agree exactly wherever the
splat is valid. The error-simulation mode then plants splatted edge
content inside seeded random regions of that conditioning, imitating the
flying-pixel artifacts forward warping produces at depth discontinuities.
Everything is deterministic under (inputs, params, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ParameterError, ShapeError
from .geometry import FlowField
from .imaging import as_image, as_mask, blend, gaussian_blur, require_same_shape, sobel_magnitude
from .splatting import DEFAULT_TAU, SplatResult, softmax_splat, splat_ones_mask

DEFAULT_EDGE_THRESHOLD = 1.0  # px/px of flow gradient; fires on depth jumps


@dataclass(frozen=True)
class TrainingPair:
    """Conditioning/target image pair plus the masks that shaped it."""

    conditioned: np.ndarray
    target: np.ndarray
    splat_mask: np.ndarray
    error_mask: np.ndarray
    provenance: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SesParams:
    """Knobs for splatting-error simulation.

    coverage is the fraction of the splatted-edge support the error
    regions should cover; blob_count rectangles are drawn per attempt.
    """

    edge_threshold: float = DEFAULT_EDGE_THRESHOLD
    coverage: float = 0.3
    blob_count: int = 12
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.coverage <= 1.0):
            raise ParameterError(f"coverage must be in [0, 1], got {self.coverage}")
        if self.blob_count < 0:
            raise ParameterError(f"blob_count must be >= 0, got {self.blob_count}")
        if self.edge_threshold < 0:
            raise ParameterError(f"edge_threshold must be >= 0, got {self.edge_threshold}")


def tpa_pair(x_src, x_tgt, flow: FlowField, importance, tau: float = DEFAULT_TAU) -> TrainingPair:
    """Aligned pair: conditioning = target masked by the splat coverage.

    x_src is only consulted for shape agreement; alignment comes from
    masking the target itself, which is the whole point.
    """
    x_src = as_image(x_src)
    x_tgt = as_image(x_tgt)
    require_same_shape(x_src, x_tgt)
    if x_src.shape[:2] != flow.shape:
        raise ShapeError(f"images {x_src.shape[:2]} vs flow {flow.shape}")
    m_splat = splat_ones_mask(flow, importance, tau)
    conditioned = x_tgt * m_splat[:, :, None]
    return TrainingPair(
        conditioned=conditioned,
        target=x_tgt,
        splat_mask=m_splat,
        error_mask=np.zeros_like(m_splat),
        provenance={"mode": "tpa", "tau": tau},
    )


def edge_mask_from_flow(flow: FlowField, theta: float = DEFAULT_EDGE_THRESHOLD) -> np.ndarray:
    """Binary mask of strong flow gradients (object boundaries).

    Combines the gradient magnitudes of both flow components:
    sqrt(|grad du|^2 + |grad dv|^2) > theta.
    """
    if theta < 0:
        raise ParameterError(f"theta must be >= 0, got {theta}")
    gu = sobel_magnitude(flow.du)
    gv = sobel_magnitude(flow.dv)
    combined = np.sqrt(gu ** 2 + gv ** 2)
    return (combined > theta).astype(np.float32)


def splat_edges(x_src, edge_mask, flow: FlowField, importance, tau: float = DEFAULT_TAU):
    """Forward-warp only the edge-region pixels of the source view.

    Non-edge pixels are excluded from accumulation entirely (their colors
    must not bleed into the warped edges). Returns the warped edge image
    and its binary support mask.
    """
    x_src = as_image(x_src)
    edge_mask = as_mask(edge_mask)
    require_same_shape(x_src, edge_mask)
    if x_src.shape[:2] != flow.shape:
        raise ShapeError(f"image {x_src.shape[:2]} vs flow {flow.shape}")
    e_src = x_src * edge_mask[:, :, None]
    edge_flow = FlowField(
        du=flow.du,
        dv=flow.dv,
        valid=flow.valid & (edge_mask > 0.5),
        tgt_depth=flow.tgt_depth,
    )
    result = softmax_splat(e_src, edge_flow, importance, tau)
    return result.image, result.mask


def gen_error_mask(support, params: SesParams) -> np.ndarray:
    """Seeded random union of axis-aligned rectangles, clipped to support.

    Re-draws the whole rectangle set for up to 10 rounds until the covered
    fraction of the support lands in [coverage/2, min(1, 2*coverage)];
    keeps the attempt closest to the target if none lands inside.
    """
    support = as_mask(support)
    h, w = support.shape
    sup = support > 0.5
    n_sup = int(sup.sum())
    if n_sup == 0 or params.blob_count == 0:
        return np.zeros_like(support)

    rng = np.random.default_rng(params.seed)
    side_hi = max(8, w // 8)
    lo_frac = params.coverage / 2.0
    hi_frac = min(1.0, 2.0 * params.coverage)

    best = None
    best_gap = np.inf
    for _ in range(10):
        acc = np.zeros((h, w), dtype=bool)
        for _ in range(params.blob_count):
            rw = int(rng.integers(4, side_hi + 1))
            rh = int(rng.integers(4, side_hi + 1))
            x0 = int(rng.integers(0, max(1, w - rw + 1)))
            y0 = int(rng.integers(0, max(1, h - rh + 1)))
            acc[y0 : y0 + rh, x0 : x0 + rw] = True
        acc &= sup
        frac = acc.sum() / n_sup
        if lo_frac <= frac <= hi_frac:
            return acc.astype(np.float32)
        gap = abs(frac - params.coverage)
        if gap < best_gap:
            best, best_gap = acc, gap
    return best.astype(np.float32)


def ses_inject(tpa: TrainingPair, e_tgt, m_error) -> TrainingPair:
    """Overwrite the conditioning with warped edge content inside m_error."""
    e_tgt = as_image(e_tgt)
    m_error = as_mask(m_error)
    require_same_shape(tpa.conditioned, e_tgt, m_error)
    conditioned = blend(e_tgt, tpa.conditioned, m_error)
    return TrainingPair(
        conditioned=conditioned,
        target=tpa.target,
        splat_mask=tpa.splat_mask,
        error_mask=m_error,
        provenance=dict(tpa.provenance, mode="ses"),
    )


def ses_pair(x_src, x_tgt, flow: FlowField, importance, params: SesParams,
             tau: float = DEFAULT_TAU) -> TrainingPair:
    """Full error-simulation pipeline on top of an aligned pair."""
    base = tpa_pair(x_src, x_tgt, flow, importance, tau)
    edge_mask = edge_mask_from_flow(flow, params.edge_threshold)
    e_tgt, support = splat_edges(x_src, edge_mask, flow, importance, tau)
    m_error = gen_error_mask(support, params)
    pair = ses_inject(base, e_tgt, m_error)
    pair.provenance.update(asdict(params))
    return pair


def degrade_texture(x_tgt, strength: float, seed: int) -> np.ndarray:
    """Synthetic texture corruption: patch color jitter plus blur patches.

    Stands in for a generative re-texturing pass when exercising fusion
    logic downstream; content stays put, fine texture does not. strength 0
    returns the input unchanged.
    """
    if not (0.0 <= strength <= 1.0):
        raise ParameterError(f"strength must be in [0, 1], got {strength}")
    img = as_image(x_tgt)
    if strength == 0.0:
        return img.copy()
    h, w, c = img.shape
    rng = np.random.default_rng(seed)
    out = img.astype(np.float64)

    # per-patch color offsets on a 16 px grid
    patch = 16
    gh, gw = (h + patch - 1) // patch, (w + patch - 1) // patch
    offsets = rng.uniform(-0.1 * strength, 0.1 * strength, size=(gh, gw, c))
    grid = offsets.repeat(patch, axis=0).repeat(patch, axis=1)[:h, :w]
    out = out + grid

    # blur random rectangles until ~30%*strength of the frame is covered
    target_area = 0.3 * strength * h * w
    rect = np.zeros((h, w), dtype=bool)
    side_lo = max(4, min(h, w) // 8)
    side_hi = max(side_lo + 1, min(h, w) // 3)
    for _ in range(200):
        if rect.sum() >= target_area:
            break
        rw = int(rng.integers(side_lo, side_hi + 1))
        rh = int(rng.integers(side_lo, side_hi + 1))
        x0 = int(rng.integers(0, max(1, w - rw + 1)))
        y0 = int(rng.integers(0, max(1, h - rh + 1)))
        rect[y0 : y0 + rh, x0 : x0 + rw] = True
    blurred = gaussian_blur(out, 2.0 * strength)
    out = np.where(rect[:, :, None], blurred, out)

    return np.clip(out, 0.0, 1.0).astype(np.float32)


def compose_sparse(a: SplatResult, b: SplatResult, sigma: float):
    """Merge two splatted views: the better-covered one leads, the other
    fills its holes through a blurred blending weight.

    Returns (image, union mask). Ties on coverage go to the first input.
    """
    if a.image.shape != b.image.shape:
        raise ShapeError(f"splat results differ: {a.image.shape} vs {b.image.shape}")
    if a.mask.sum() >= b.mask.sum():
        primary, secondary = a, b
    else:
        primary, secondary = b, a

    p = primary.mask > 0.5
    s = secondary.mask > 0.5
    wgt = gaussian_blur(primary.mask.astype(np.float64), sigma)
    wgt = np.where(p & ~s, 1.0, wgt)
    wgt = np.where(s & ~p, 0.0, wgt)
    either = p | s
    wgt = np.where(either, wgt, 0.0)

    image = blend(primary.image, secondary.image, wgt)
    image = image * either[:, :, None]
    return image.astype(np.float32), (p | s).astype(np.float32)

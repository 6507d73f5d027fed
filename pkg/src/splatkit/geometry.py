"""Pinhole camera model and view-transformation fields.

Conventions (fixed for the whole package, they matter):

* Poses are world-to-camera: ``X_cam = R @ X_world + t``.
* Pixel centers sit at integer coordinates; (0, 0) is the center of the
  top-left pixel. ``u`` runs along width, ``v`` along height.
* Depth is z-depth (distance along the camera z axis), not ray length.
* Points must be in front of a camera by at least ``BEHIND_EPS`` scene
  units to project; anything closer or behind is marked invalid rather
  than raising.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ShapeError, ValidationError

BEHIND_EPS = 1e-6

# Rotations from text files carry limited precision; anything off by more
# than this from orthonormal is treated as data corruption, not roundoff.
ORTHO_REPAIR_TOL = 1e-3
ORTHO_EXACT_TOL = 1e-6


def _nearest_rotation(r: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(r)
    rot = u @ vt
    if np.linalg.det(rot) < 0:
        u[:, -1] = -u[:, -1]
        rot = u @ vt
    return rot


@dataclass(frozen=True)
class CameraFrame:
    """Pinhole intrinsics plus a world-to-camera rigid pose."""

    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValidationError(f"focal lengths must be positive, got fx={self.fx} fy={self.fy}")
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if r.shape != (3, 3):
            raise ValidationError(f"rotation must be 3x3, got {r.shape}")
        err = np.abs(r.T @ r - np.eye(3)).max()
        if err > ORTHO_REPAIR_TOL or np.linalg.det(r) < 0:
            raise ValidationError(
                f"rotation is not orthonormal (max |R^T R - I| = {err:.2e}, det = {np.linalg.det(r):.4f})"
            )
        if err > ORTHO_EXACT_TOL:
            r = _nearest_rotation(r)
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @property
    def intrinsic_matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True)
class FlowField:
    """Per-pixel target-minus-source displacement with validity.

    ``tgt_depth`` is the depth of the reprojected point in the target
    camera and is present only when the field was derived from depth and
    poses; flow read from files or built from disparity leaves it None.
    Invalid pixels always carry du = dv = 0.
    """

    du: np.ndarray
    dv: np.ndarray
    valid: np.ndarray
    tgt_depth: np.ndarray | None = None

    def __post_init__(self):
        du = np.asarray(self.du, dtype=np.float64)
        dv = np.asarray(self.dv, dtype=np.float64)
        valid = np.asarray(self.valid, dtype=bool)
        if du.shape != dv.shape or du.shape != valid.shape or du.ndim != 2:
            raise ShapeError(
                f"flow components must share an (H, W) shape, got {du.shape}/{dv.shape}/{valid.shape}"
            )
        du = np.where(valid, du, 0.0)
        dv = np.where(valid, dv, 0.0)
        td = self.tgt_depth
        if td is not None:
            td = np.asarray(td, dtype=np.float64)
            if td.shape != du.shape:
                raise ShapeError(f"tgt_depth shape {td.shape} != flow shape {du.shape}")
            td.flags.writeable = False
        for a in (du, dv, valid):
            a.flags.writeable = False
        object.__setattr__(self, "du", du)
        object.__setattr__(self, "dv", dv)
        object.__setattr__(self, "valid", valid)
        object.__setattr__(self, "tgt_depth", td)

    @property
    def shape(self) -> tuple[int, int]:
        return self.du.shape


def check_depth(depth) -> np.ndarray:
    """Validate a depth map: finite and strictly positive everywhere."""
    d = np.asarray(depth, dtype=np.float64)
    if d.ndim != 2:
        raise ShapeError(f"depth must be (H, W), got shape {d.shape}")
    if not np.all(np.isfinite(d)) or d.min() <= 0:
        raise ParameterError("depth values must be finite and > 0")
    return d


def reproject_point(u, v, d, src: CameraFrame, tgt: CameraFrame):
    """Reproject pixel (u, v) with depth d from ``src`` into ``tgt``.

    Returns (u', v', z', valid). Points landing behind the target camera
    (z' <= BEHIND_EPS) come back with valid=False; never raises for them.
    """
    x = (u - src.cx) / src.fx * d
    y = (v - src.cy) / src.fy * d
    p_src = np.array([x, y, d])
    p_world = src.rotation.T @ (p_src - src.translation)
    p_tgt = tgt.rotation @ p_world + tgt.translation
    z = p_tgt[2]
    if z <= BEHIND_EPS:
        return 0.0, 0.0, 0.0, False
    return (
        tgt.fx * p_tgt[0] / z + tgt.cx,
        tgt.fy * p_tgt[1] / z + tgt.cy,
        z,
        True,
    )


def flow_from_depth(depth, src: CameraFrame, tgt: CameraFrame) -> FlowField:
    """Per-pixel displacement src -> tgt from depth and two camera poses.

    Vectorized form of :func:`reproject_point` applied at every pixel
    center; fills tgt_depth with the reprojected z for splat weighting.
    """
    d = check_depth(depth)
    h, w = d.shape
    uu, vv = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))

    x = (uu - src.cx) / src.fx * d
    y = (vv - src.cy) / src.fy * d
    pts = np.stack([x, y, d], axis=-1)  # (H, W, 3) in source camera coords

    # X_t = R_tgt R_src^T (X_s - t_src) + t_tgt, folded into one affine map
    m = tgt.rotation @ src.rotation.T
    offset = tgt.translation - m @ src.translation
    p_tgt = pts @ m.T + offset

    z = p_tgt[:, :, 2]
    valid = z > BEHIND_EPS
    safe_z = np.where(valid, z, 1.0)
    u_t = tgt.fx * p_tgt[:, :, 0] / safe_z + tgt.cx
    v_t = tgt.fy * p_tgt[:, :, 1] / safe_z + tgt.cy
    du = np.where(valid, u_t - uu, 0.0)
    dv = np.where(valid, v_t - vv, 0.0)
    tgt_depth = np.where(valid, z, 0.0)
    return FlowField(du=du, dv=dv, valid=valid, tgt_depth=tgt_depth)


def disparity_to_flow(disparity, direction: str = "left-to-right") -> FlowField:
    """Build a purely horizontal flow field from a rectified disparity map.

    Positive disparity shifts content leftward in the right-eye view, so
    left-to-right uses du = -disparity and right-to-left du = +disparity.
    No target depth is attached; splatting importance falls back to a
    disparity proxy.
    """
    disp = np.asarray(disparity, dtype=np.float64)
    if disp.ndim == 3 and disp.shape[2] == 1:
        disp = disp[:, :, 0]
    if disp.ndim != 2:
        raise ShapeError(f"disparity must be (H, W), got shape {disp.shape}")
    if not np.all(np.isfinite(disp)) or disp.min() < 0:
        raise ParameterError("disparity must be finite and >= 0")
    if direction == "left-to-right":
        du = -disp
    elif direction == "right-to-left":
        du = disp.copy()
    else:
        raise ParameterError(f"direction must be 'left-to-right' or 'right-to-left', got {direction!r}")
    return FlowField(du=du, dv=np.zeros_like(du), valid=np.ones(du.shape, dtype=bool))

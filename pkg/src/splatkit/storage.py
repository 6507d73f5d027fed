"""Readers and writers for every on-disk format the pipeline touches.

PNG support is a self-contained codec over zlib rather than an imaging
library: the contract here is lossless round trips at 8 and 16 bits for
1-4 channels plus parse errors that carry byte offsets, and common
libraries silently narrow 16-bit multichannel files or cannot write
2-channel ones. Non-interlaced gray / gray+alpha / RGB / RGBA at 8 or 16
bits is accepted; palette and interlaced files are rejected as
unsupported. All rasters are top-down row-major in memory; formats with
other conventions (PFM) are flipped on the way in and out.
"""

from __future__ import annotations

import io
import struct
import zlib
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DegenerateInputError, ParameterError, ParseError
from .geometry import CameraFrame, FlowField

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
# color type -> channel count
_PNG_COLOR_TYPES = {0: 1, 2: 3, 4: 2, 6: 4}
_PNG_CHANNELS_TO_TYPE = {1: 0, 2: 4, 3: 2, 4: 6}

FLO_MAGIC = 202021.25


# ---------------------------------------------------------------------------
# PNG

@njit(cache=True)
def _defilter_scanlines(raw, stride, bpp):
    h = raw.shape[0]
    out = np.empty((h, stride), dtype=np.uint8)
    for y in range(h):
        ft = raw[y, 0]
        for x in range(stride):
            cur = int(raw[y, 1 + x])
            left = int(out[y, x - bpp]) if x >= bpp else 0
            up = int(out[y - 1, x]) if y > 0 else 0
            ul = int(out[y - 1, x - bpp]) if (y > 0 and x >= bpp) else 0
            if ft == 0:
                v = cur
            elif ft == 1:
                v = cur + left
            elif ft == 2:
                v = cur + up
            elif ft == 3:
                v = cur + (left + up) // 2
            else:  # Paeth; filter bytes validated before the call
                p = left + up - ul
                pa = abs(p - left)
                pb = abs(p - up)
                pc = abs(p - ul)
                if pa <= pb and pa <= pc:
                    pred = left
                elif pb <= pc:
                    pred = up
                else:
                    pred = ul
                v = cur + pred
            out[y, x] = v & 0xFF
    return out


def write_png(path, codes: np.ndarray, bit_depth: int) -> None:
    """Write integer sample codes as a non-interlaced PNG (filter None)."""
    if bit_depth not in (8, 16):
        raise ParameterError(f"bit_depth must be 8 or 16, got {bit_depth}")
    if codes.ndim == 2:
        codes = codes[:, :, None]
    h, w, c = codes.shape
    if c not in _PNG_CHANNELS_TO_TYPE:
        raise ParameterError(f"channel count must be 1..4, got {c}")
    max_code = (1 << bit_depth) - 1
    if codes.min() < 0 or codes.max() > max_code:
        raise ParameterError(f"sample codes out of range for {bit_depth}-bit")
    sample_dtype = ">u2" if bit_depth == 16 else "u1"
    payload = codes.astype(sample_dtype).tobytes()
    stride = w * c * (bit_depth // 8)
    lines = np.frombuffer(payload, dtype=np.uint8).reshape(h, stride)
    raw = np.zeros((h, 1 + stride), dtype=np.uint8)
    raw[:, 1:] = lines

    def chunk(ctype: bytes, data: bytes) -> bytes:
        return (
            struct.pack(">I", len(data))
            + ctype
            + data
            + struct.pack(">I", zlib.crc32(ctype + data) & 0xFFFFFFFF)
        )

    ihdr = struct.pack(">IIBBBBB", w, h, bit_depth, _PNG_CHANNELS_TO_TYPE[c], 0, 0, 0)
    idat = zlib.compress(raw.tobytes(), 6)
    with open(path, "wb") as f:
        f.write(PNG_SIGNATURE)
        f.write(chunk(b"IHDR", ihdr))
        f.write(chunk(b"IDAT", idat))
        f.write(chunk(b"IEND", b""))


def read_png(path) -> tuple[np.ndarray, int]:
    """Read a PNG into integer sample codes; returns (codes, bit_depth)."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != PNG_SIGNATURE:
        raise ParseError("not a PNG file (bad signature)", offset=0)

    pos = 8
    ihdr = None
    idat = bytearray()
    seen_iend = False
    while pos < len(blob):
        if pos + 8 > len(blob):
            raise ParseError("truncated chunk header", offset=pos)
        (length,) = struct.unpack(">I", blob[pos : pos + 4])
        ctype = blob[pos + 4 : pos + 8]
        data_start = pos + 8
        data_end = data_start + length
        if data_end + 4 > len(blob):
            raise ParseError(f"truncated {ctype!r} chunk", offset=pos)
        data = blob[data_start:data_end]
        (crc,) = struct.unpack(">I", blob[data_end : data_end + 4])
        if crc != (zlib.crc32(ctype + data) & 0xFFFFFFFF):
            raise ParseError(f"CRC mismatch in {ctype!r} chunk", offset=data_end)
        if ctype == b"IHDR":
            ihdr = (data, pos)
        elif ctype == b"IDAT":
            idat.extend(data)
        elif ctype == b"IEND":
            seen_iend = True
            break
        pos = data_end + 4

    if ihdr is None:
        raise ParseError("missing IHDR chunk", offset=8)
    if not seen_iend:
        raise ParseError("missing IEND chunk", offset=len(blob))
    data, ihdr_pos = ihdr
    if len(data) != 13:
        raise ParseError("IHDR must be 13 bytes", offset=ihdr_pos)
    w, h, bit_depth, color_type, comp, filt, interlace = struct.unpack(">IIBBBBB", data)
    if w == 0 or h == 0:
        raise ParseError("zero image dimension", offset=ihdr_pos)
    if comp != 0 or filt != 0:
        raise ParseError("unsupported compression/filter method", offset=ihdr_pos)
    if interlace != 0:
        raise ParseError("interlaced PNG not supported", offset=ihdr_pos)
    if color_type not in _PNG_COLOR_TYPES:
        raise ParseError(f"unsupported color type {color_type} (palette?)", offset=ihdr_pos)
    if bit_depth not in (8, 16):
        raise ParseError(f"unsupported bit depth {bit_depth}", offset=ihdr_pos)

    c = _PNG_COLOR_TYPES[color_type]
    stride = w * c * (bit_depth // 8)
    try:
        decompressed = zlib.decompress(bytes(idat))
    except zlib.error as e:
        raise ParseError(f"IDAT decompression failed: {e}", offset=ihdr_pos) from None
    if len(decompressed) != h * (1 + stride):
        raise ParseError(
            f"IDAT holds {len(decompressed)} bytes, expected {h * (1 + stride)}",
            offset=ihdr_pos,
        )
    raw = np.frombuffer(decompressed, dtype=np.uint8).reshape(h, 1 + stride)
    if raw[:, 0].max(initial=0) > 4:
        bad = int(np.argmax(raw[:, 0] > 4))
        raise ParseError(f"invalid filter byte on scanline {bad}", offset=ihdr_pos)
    recon = _defilter_scanlines(raw, stride, c * (bit_depth // 8))
    sample_dtype = ">u2" if bit_depth == 16 else "u1"
    codes = np.frombuffer(recon.tobytes(), dtype=sample_dtype).reshape(h, w, c)
    return codes.astype(np.uint16 if bit_depth == 16 else np.uint8), bit_depth


def write_image(path, image: np.ndarray, bit_depth: int = 8) -> None:
    """Quantize a [0,1] float image to codes and write it as PNG."""
    img = np.asarray(image)
    if img.ndim == 2:
        img = img[:, :, None]
    max_code = (1 << bit_depth) - 1
    codes = np.rint(np.clip(img.astype(np.float64), 0.0, 1.0) * max_code).astype(np.int64)
    write_png(path, codes, bit_depth)


def read_image(path) -> tuple[np.ndarray, int]:
    """Read a PNG as a float32 [0,1] image: value = code / max_code.

    Returns (image, bit_depth) so writers can preserve the source depth.
    """
    codes, bit_depth = read_png(path)
    max_code = (1 << bit_depth) - 1
    return (codes.astype(np.float32) / np.float32(max_code)), bit_depth


# ---------------------------------------------------------------------------
# PFM (grayscale float rasters: depth, disparity, weights)

def write_pfm(path, raster: np.ndarray) -> None:
    """Write a single-channel float32 raster as a little-endian 'Pf' PFM."""
    arr = np.asarray(raster, dtype=np.float32)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim != 2:
        raise ParameterError(f"PFM raster must be (H, W), got {arr.shape}")
    h, w = arr.shape
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{w} {h}\n".encode("ascii"))
        f.write(b"-1.0\n")
        f.write(arr[::-1].astype("<f4").tobytes())  # PFM rows run bottom-up


def read_pfm(path) -> np.ndarray:
    """Read a grayscale PFM into a top-down float32 (H, W) raster."""
    with open(path, "rb") as f:
        blob = f.read()

    def next_token(pos):
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ParseError("unexpected end of PFM header", offset=start)
        return blob[start:pos], pos

    magic, pos = next_token(0)
    if magic == b"PF":
        raise ParseError("color 'PF' PFM not supported, expected grayscale 'Pf'", offset=0)
    if magic != b"Pf":
        raise ParseError(f"bad PFM magic {magic!r}", offset=0)
    wtok, pos = next_token(pos)
    htok, pos = next_token(pos)
    stok, pos = next_token(pos)
    try:
        w, h = int(wtok), int(htok)
        scale = float(stok)
    except ValueError:
        raise ParseError("malformed PFM dimensions/scale", offset=pos) from None
    if w <= 0 or h <= 0 or scale == 0:
        raise ParseError(f"bad PFM header values w={w} h={h} scale={scale}", offset=pos)
    data_start = pos + 1  # single whitespace byte terminates the header
    expected = w * h * 4
    data = blob[data_start : data_start + expected]
    if len(data) != expected:
        raise ParseError(
            f"PFM payload holds {len(data)} bytes, expected {expected}", offset=data_start
        )
    dtype = "<f4" if scale < 0 else ">f4"
    arr = np.frombuffer(data, dtype=dtype).reshape(h, w).astype(np.float32)
    return arr[::-1].copy()


# ---------------------------------------------------------------------------
# Middlebury .flo optical flow

def write_flo(path, flow: FlowField) -> None:
    """Write flow displacements as a Middlebury .flo (validity not stored)."""
    h, w = flow.shape
    inter = np.empty((h, w, 2), dtype="<f4")
    inter[:, :, 0] = flow.du
    inter[:, :, 1] = flow.dv
    with open(path, "wb") as f:
        f.write(struct.pack("<f", FLO_MAGIC))
        f.write(struct.pack("<ii", w, h))
        f.write(inter.tobytes())


def read_flo(path) -> FlowField:
    """Read a Middlebury .flo file; every pixel comes back valid."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 12:
        raise ParseError("file too short for a .flo header", offset=len(blob))
    (magic,) = struct.unpack("<f", blob[0:4])
    if magic != np.float32(FLO_MAGIC):
        raise ParseError(f"bad .flo magic {magic!r}, expected {FLO_MAGIC}", offset=0)
    w, h = struct.unpack("<ii", blob[4:12])
    if w <= 0 or h <= 0:
        raise ParseError(f"bad .flo dimensions {w}x{h}", offset=4)
    expected = w * h * 2 * 4
    if len(blob) - 12 != expected:
        raise ParseError(
            f".flo payload holds {len(blob) - 12} bytes, expected {expected}", offset=12
        )
    inter = np.frombuffer(blob, dtype="<f4", offset=12).reshape(h, w, 2)
    du = inter[:, :, 0].astype(np.float64)
    dv = inter[:, :, 1].astype(np.float64)
    return FlowField(du=du, dv=dv, valid=np.ones((h, w), dtype=bool))


# ---------------------------------------------------------------------------
# Camera trajectories

@dataclass(frozen=True)
class TrajectoryFile:
    """Ordered (timestamp, camera) list parsed from a trajectory text."""

    frames: list

    def __len__(self):
        return len(self.frames)

    def camera(self, index: int) -> CameraFrame:
        return self.frames[index][1]


_AXIS_INDEX = {"x": 0, "y": 1, "z": 2}


def _axes_matrix(spec: str) -> np.ndarray:
    """Signed-permutation matrix from a spec like 'xyz' or 'x-zy'."""
    cols = []
    i = 0
    while i < len(spec):
        sign = 1.0
        if spec[i] == "-":
            sign = -1.0
            i += 1
        if i >= len(spec) or spec[i] not in _AXIS_INDEX:
            raise ParameterError(f"bad axis spec {spec!r}")
        col = np.zeros(3)
        col[_AXIS_INDEX[spec[i]]] = sign
        cols.append(col)
        i += 1
    if len(cols) != 3:
        raise ParameterError(f"axis spec must name three axes, got {spec!r}")
    return np.stack(cols, axis=1)


def parse_trajectory(text: str, width: int, height: int, world_axes: str = "xyz") -> TrajectoryFile:
    """Parse a camera-per-line trajectory into denormalized CameraFrames.

    Line layout (whitespace separated, '#' starts a comment):

        timestamp fx fy cx cy 0 0 r00 r01 r02 t0 r10 r11 r12 t1 r20 r21 r22 t2

    with intrinsics normalized by image width/height and the 12 trailing
    floats a row-major 3x4 world-to-camera [R|t]. ``world_axes`` applies a
    signed axis permutation to the world frame for datasets whose pose
    convention differs (default identity).
    """
    axes = _axes_matrix(world_axes)
    frames = []
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 19:
            raise ParseError(
                f"expected 19 fields (timestamp, 4 intrinsics, 2 zeros, 12 pose), got {len(fields)}",
                line=lineno,
            )
        timestamp = fields[0]
        try:
            vals = [float(x) for x in fields[1:]]
        except ValueError:
            raise ParseError("non-numeric field in camera line", line=lineno) from None
        fx, fy, cx, cy = vals[0] * width, vals[1] * height, vals[2] * width, vals[3] * height
        pose = np.array(vals[6:18], dtype=np.float64).reshape(3, 4)
        rotation = pose[:, :3] @ axes
        translation = pose[:, 3]
        try:
            cam = CameraFrame(
                fx=fx, fy=fy, cx=cx, cy=cy, rotation=rotation, translation=translation
            )
        except Exception as e:
            raise ParseError(f"invalid camera: {e}", line=lineno) from None
        frames.append((timestamp, cam))
    if not frames:
        raise ParseError("trajectory holds no camera lines", line=1)
    return TrajectoryFile(frames=frames)


def load_trajectory(path, width: int, height: int, world_axes: str = "xyz") -> TrajectoryFile:
    with open(path, "r", encoding="utf-8") as f:
        return parse_trajectory(f.read(), width, height, world_axes)


# ---------------------------------------------------------------------------
# Evaluation pair protocol

@dataclass(frozen=True)
class EvalPairSpec:
    src_index: int
    tgt_index: int

    def __post_init__(self):
        if self.src_index == self.tgt_index:
            raise ParameterError("source and target frame must differ")


def make_eval_pairs(n_frames: int, skip: int | None = None, rand: int | None = None,
                    seed: int | None = None) -> list[EvalPairSpec]:
    """Build evaluation (source, target) index pairs.

    skip mode pairs every frame with the one ``skip`` ahead; rand mode
    draws, per frame, a nonzero offset uniform on [-rand, rand], resampled
    until the target stays in range. rand mode requires an explicit seed.
    """
    if (skip is None) == (rand is None):
        raise ParameterError("exactly one of skip / rand must be given")
    if skip is not None:
        if skip < 1:
            raise ParameterError(f"skip must be >= 1, got {skip}")
        if n_frames <= skip:
            raise DegenerateInputError(f"need more than {skip} frames, got {n_frames}")
        return [EvalPairSpec(i, i + skip) for i in range(n_frames - skip)]
    if rand < 1:
        raise ParameterError(f"rand must be >= 1, got {rand}")
    if n_frames < 2:
        raise DegenerateInputError(f"need at least 2 frames, got {n_frames}")
    if seed is None:
        raise ParameterError("rand mode requires an explicit seed")
    rng = np.random.default_rng(seed)
    pairs = []
    for i in range(n_frames):
        while True:
            delta = int(rng.integers(-rand, rand + 1))
            if delta != 0 and 0 <= i + delta < n_frames:
                pairs.append(EvalPairSpec(i, i + delta))
                break
    return pairs

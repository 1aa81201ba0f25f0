"""
Flow, frame and mask data types with their on-disk formats.

- ``.flo``: Middlebury layout, float32 magic 202021.25, int32 width, int32
  height, then H*W interleaved float32 (u, v), little-endian, row-major.
- Frames and masks: 8-bit PNG (or binary PPM/PGM) through Pillow; masks are
  stored 0/255 and loaded as {0, 1} with 1 marking the missing region.
- Mask directories hold zero-padded, frame-indexed filenames.
"""
from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Set, Union

import numpy as np
from PIL import Image

from .errors import DatasetError, FloFormatError, ShapeError

logger = logging.getLogger(__name__)

FLO_MAGIC = 202021.25
FLO_HEADER_BYTES = 12
IMAGE_SUFFIXES = (".png", ".ppm", ".pgm")


@dataclass
class FlowField:
    """Per-pixel motion (u right-positive, v down-positive, pixel units).

    Attributes:
        uv: [H, W, 2] displacements
        valid: Optional [H, W] validity mask (1 = valid)
        flags: Free-form markers set by processing steps (e.g. ``all_corrupted``)
    """
    uv: np.ndarray
    valid: Optional[np.ndarray] = None
    flags: Set[str] = field(default_factory=set)

    def __post_init__(self):
        self.uv = np.asarray(self.uv)
        if self.uv.ndim != 3 or self.uv.shape[2] != 2:
            raise ShapeError(f"FlowField expects [H, W, 2], got {self.uv.shape}")

    @property
    def height(self) -> int:
        return self.uv.shape[0]

    @property
    def width(self) -> int:
        return self.uv.shape[1]

    @property
    def u(self) -> np.ndarray:
        return self.uv[..., 0]

    @property
    def v(self) -> np.ndarray:
        return self.uv[..., 1]

    @classmethod
    def zeros(cls, height: int, width: int, dtype=np.float32) -> "FlowField":
        return cls(np.zeros((height, width, 2), dtype=dtype))

    def copy(self) -> "FlowField":
        valid = None if self.valid is None else self.valid.copy()
        return FlowField(self.uv.copy(), valid, set(self.flags))

    def lint(self) -> List[str]:
        """Report physically implausible content without modifying the field."""
        issues = []
        if not np.all(np.isfinite(self.uv)):
            issues.append("non-finite values")
        if np.any(np.abs(self.u) >= self.width):
            issues.append(f"|u| >= width ({self.width})")
        if np.any(np.abs(self.v) >= self.height):
            issues.append(f"|v| >= height ({self.height})")
        for issue in issues:
            logger.warning(f"[FLO] lint: {issue}")
        return issues


@dataclass
class VideoClip:
    """Frames [T, H, W, 3] in [0, 1] with aligned masks [T, H, W] (1 = corrupted)."""
    frames: np.ndarray
    masks: np.ndarray
    name: str = "clip"

    def __post_init__(self):
        self.frames = np.asarray(self.frames)
        self.masks = np.asarray(self.masks)
        if self.frames.ndim != 4 or self.frames.shape[-1] != 3:
            raise ShapeError(f"VideoClip frames must be [T, H, W, 3], got {self.frames.shape}")
        if self.masks.shape != self.frames.shape[:3]:
            raise ShapeError(f"VideoClip masks {self.masks.shape} do not match frames {self.frames.shape}")

    @property
    def length(self) -> int:
        return self.frames.shape[0]

    @property
    def extent(self):
        return self.frames.shape[1], self.frames.shape[2]

    def masked_frames(self) -> np.ndarray:
        return self.frames * (1.0 - self.masks[..., None])


# ---------------------------------------------------------------------- .flo
def read_flo(data: bytes) -> FlowField:
    """Parse a Middlebury .flo payload.

    Raises:
        FloFormatError: wrong magic, invalid extents, truncated or oversized payload
    """
    if len(data) < FLO_HEADER_BYTES:
        raise FloFormatError(f"truncated .flo header ({len(data)} bytes)")
    (magic,) = struct.unpack_from("<f", data, 0)
    if magic != FLO_MAGIC:
        raise FloFormatError(f"bad .flo magic {magic!r} (expected {FLO_MAGIC})")
    width, height = struct.unpack_from("<ii", data, 4)
    if width <= 0 or height <= 0:
        raise FloFormatError(f"invalid .flo extents {width}x{height}")
    expected = FLO_HEADER_BYTES + 8 * width * height
    if len(data) < expected:
        raise FloFormatError(f"truncated .flo payload: {len(data)} bytes, expected {expected}")
    if len(data) > expected:
        raise FloFormatError(f".flo payload has {len(data) - expected} trailing bytes")
    uv = np.frombuffer(data, dtype="<f4", count=2 * width * height, offset=FLO_HEADER_BYTES)
    return FlowField(uv.reshape(height, width, 2).astype(np.float32))


def write_flo(flow: FlowField) -> bytes:
    header = struct.pack("<f", FLO_MAGIC) + struct.pack("<ii", flow.width, flow.height)
    return header + np.ascontiguousarray(flow.uv, dtype="<f4").tobytes()


def read_flo_file(path: Union[str, Path]) -> FlowField:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"flow file not found: {path}")
    return read_flo(path.read_bytes())


def write_flo_file(path: Union[str, Path], flow: FlowField) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(write_flo(flow))
    return path


# ------------------------------------------------------------- color wheel
def make_colorwheel() -> np.ndarray:
    """Middlebury color wheel [55, 3] (RY, YG, GC, CB, BM, MR segments)."""
    ry, yg, gc, cb, bm, mr = 15, 6, 4, 11, 13, 6
    wheel = np.zeros((ry + yg + gc + cb + bm + mr, 3))
    col = 0
    wheel[0:ry, 0] = 255
    wheel[0:ry, 1] = np.floor(255 * np.arange(ry) / ry)
    col += ry
    wheel[col:col + yg, 0] = 255 - np.floor(255 * np.arange(yg) / yg)
    wheel[col:col + yg, 1] = 255
    col += yg
    wheel[col:col + gc, 1] = 255
    wheel[col:col + gc, 2] = np.floor(255 * np.arange(gc) / gc)
    col += gc
    wheel[col:col + cb, 1] = 255 - np.floor(255 * np.arange(cb) / cb)
    wheel[col:col + cb, 2] = 255
    col += cb
    wheel[col:col + bm, 2] = 255
    wheel[col:col + bm, 0] = np.floor(255 * np.arange(bm) / bm)
    col += bm
    wheel[col:col + mr, 2] = 255 - np.floor(255 * np.arange(mr) / mr)
    wheel[col:col + mr, 0] = 255
    return wheel


def flow_to_color(flow: FlowField, max_radius: Optional[float] = None) -> np.ndarray:
    """Render flow as uint8 RGB [H, W, 3]: hue = direction, saturation = magnitude.

    Magnitudes are normalized by ``max_radius`` or, when it is None, by the field's
    largest magnitude. Zero flow maps to white (the wheel center).

    Raises:
        ValueError: negative ``max_radius``
    """
    if max_radius is not None and max_radius < 0:
        raise ValueError(f"max_radius must be >= 0, got {max_radius}")
    u = np.nan_to_num(flow.u.astype(np.float64))
    v = np.nan_to_num(flow.v.astype(np.float64))
    rad = np.sqrt(u ** 2 + v ** 2)
    scale = float(rad.max(initial=0.0)) if max_radius is None else float(max_radius)
    eps = 1e-5
    u, v = u / (scale + eps), v / (scale + eps)

    wheel = make_colorwheel()
    ncols = wheel.shape[0]
    rad = np.sqrt(u ** 2 + v ** 2)
    angle = np.arctan2(-v, -u) / np.pi
    fk = (angle + 1) / 2 * (ncols - 1)
    k0 = np.floor(fk).astype(np.int64)
    k1 = k0 + 1
    k1[k1 == ncols] = 0
    f = fk - k0
    image = np.zeros(u.shape + (3,), dtype=np.uint8)
    for i in range(3):
        col = (1 - f) * wheel[k0, i] / 255.0 + f * wheel[k1, i] / 255.0
        inside = rad <= 1
        col[inside] = 1 - rad[inside] * (1 - col[inside])
        col[~inside] = col[~inside] * 0.75
        image[..., i] = np.floor(255 * col)
    return image


# ----------------------------------------------------------- frames & masks
def frame_name(index: int, suffix: str = ".png") -> str:
    return f"{index:05d}{suffix}"


def save_image(path: Union[str, Path], array: np.ndarray) -> Path:
    """Write [H, W, 3] or [H, W] values in [0, 1] (or uint8) as an 8-bit image."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.asarray(array)
    if arr.dtype != np.uint8:
        arr = np.clip(np.round(arr * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr).save(path)
    return path


def load_image(path: Union[str, Path]) -> np.ndarray:
    """Read an 8-bit image as float64 in [0, 1] ([H, W, 3] for color, [H, W] for gray)."""
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"image not found: {path}")
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB" if img.mode not in ("L", "1") else "L"))
    return arr.astype(np.float64) / 255.0


def save_mask(path: Union[str, Path], mask: np.ndarray) -> Path:
    return save_image(path, (np.asarray(mask) > 0).astype(np.uint8) * 255)


def load_mask(path: Union[str, Path]) -> np.ndarray:
    arr = load_image(path)
    if arr.ndim == 3:
        arr = arr.max(axis=2)
    return (arr > 0.5).astype(np.uint8)


def list_frame_files(directory: Union[str, Path]) -> List[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise DatasetError(f"directory not found: {directory}")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def load_mask_dir(directory: Union[str, Path]) -> np.ndarray:
    """Load an external mask directory into [T, H, W] {0, 1}."""
    files = list_frame_files(directory)
    if not files:
        raise DatasetError(f"no mask images in: {directory}")
    masks = [load_mask(p) for p in files]
    shapes = {m.shape for m in masks}
    if len(shapes) != 1:
        raise ShapeError(f"mask directory {directory} mixes extents {sorted(shapes)}")
    logger.info(f"[DATA] Loaded {len(masks)} masks from: {directory}")
    return np.stack(masks)


def load_frame_dir(directory: Union[str, Path]) -> np.ndarray:
    files = list_frame_files(directory)
    if not files:
        raise DatasetError(f"no frame images in: {directory}")
    frames = [load_image(p) for p in files]
    frames = [np.repeat(f[..., None], 3, axis=2) if f.ndim == 2 else f for f in frames]
    return np.stack(frames)

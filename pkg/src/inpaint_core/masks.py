"""
Procedural masksets. A mask clip is a uint8 array [T, H, W] with 1 marking
the missing region.

- square masks: one square per frame whose area is 1/16 of the frame on
  average, either static or drifting with a bounded integer velocity
- object masks: smooth star-shaped blobs covering 2-15% of the frame that
  drift coherently over time
"""
from __future__ import annotations

import logging
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage

from .ini_configuration import KNOWN_MASK_KINDS

logger = logging.getLogger(__name__)

SQUARE_AREA_RATIO = 1.0 / 16.0
SQUARE_JITTER = 0.15
OBJECT_AREA_BAND = (0.02, 0.15)


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _reflect(position: int, velocity: int, low: int, high: int) -> Tuple[int, int]:
    """Advance one step inside [low, high], bouncing off either end."""
    nxt = position + velocity
    if nxt < low or nxt > high:
        velocity = -velocity
        nxt = min(max(position + velocity, low), high)
    return nxt, velocity


def gen_square_masks(length: int, height: int, width: int, seed=0, motion: str = "static",
                     max_step: int = 2) -> np.ndarray:
    """Square masks with mean area ratio 1/16.

    Args:
        length: Number of frames T
        height, width: Frame extent
        seed: Integer seed or a ``np.random.Generator``
        motion: ``static`` (same square every frame) or ``drift``
        max_step: Per-axis bound of the drift velocity in pixels/frame

    Returns:
        uint8 [T, H, W]
    """
    if motion not in ("static", "drift"):
        raise ValueError(f"unknown square-mask motion '{motion}'")
    rng = _rng(seed)
    scale = rng.uniform(1.0 - SQUARE_JITTER, 1.0 + SQUARE_JITTER)
    side = int(round(np.sqrt(height * width * SQUARE_AREA_RATIO) * scale))
    side = max(1, min(side, height, width))
    y = int(rng.integers(0, height - side + 1))
    x = int(rng.integers(0, width - side + 1))
    vy = vx = 0
    if motion == "drift" and max_step > 0:
        while vy == 0 and vx == 0:
            vy = int(rng.integers(-max_step, max_step + 1))
            vx = int(rng.integers(-max_step, max_step + 1))

    masks = np.zeros((length, height, width), dtype=np.uint8)
    for t in range(length):
        masks[t, y:y + side, x:x + side] = 1
        if motion == "drift":
            y, vy = _reflect(y, vy, 0, height - side)
            x, vx = _reflect(x, vx, 0, width - side)
    return masks


def _blob(height: int, width: int, center: Tuple[float, float], radius: float,
          amplitudes: np.ndarray, phases: np.ndarray) -> np.ndarray:
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    dy, dx = yy - center[0], xx - center[1]
    theta = np.arctan2(dy, dx)
    k = np.arange(2, 2 + len(amplitudes))[:, None, None]
    boundary = radius * (1.0 + (amplitudes[:, None, None] * np.cos(k * theta + phases[:, None, None])).sum(axis=0))
    inside = np.hypot(dy, dx) <= boundary
    labels, count = ndimage.label(inside)
    if count > 1:
        sizes = ndimage.sum(inside, labels, index=np.arange(1, count + 1))
        inside = labels == (int(np.argmax(sizes)) + 1)
    return inside.astype(np.uint8)


def gen_object_masks(length: int, height: int, width: int, seed=0,
                     area_band: Tuple[float, float] = OBJECT_AREA_BAND, max_speed: float = 1.5) -> np.ndarray:
    """Free-form blob masks: one connected smooth blob per frame, drifting over time.

    Returns:
        uint8 [T, H, W]
    """
    rng = _rng(seed)
    low, high = area_band
    # shape harmonics add at most ~1 + sum(a^2)/2 to the disc area
    target = rng.uniform(low + 0.25 * (high - low), high - 0.2 * (high - low))
    radius = np.sqrt(target * height * width / np.pi)
    amplitudes = rng.uniform(0.0, 0.12, size=3)
    phases = rng.uniform(0.0, 2 * np.pi, size=3)
    reach = radius * (1.0 + amplitudes.sum())
    y_lo, y_hi = reach, max(reach, height - 1 - reach)
    x_lo, x_hi = reach, max(reach, width - 1 - reach)
    cy, cx = rng.uniform(y_lo, y_hi), rng.uniform(x_lo, x_hi)
    vy, vx = rng.uniform(-max_speed, max_speed, size=2)

    masks = np.zeros((length, height, width), dtype=np.uint8)
    for t in range(length):
        masks[t] = _blob(height, width, (cy, cx), radius, amplitudes, phases)
        if not y_lo <= cy + vy <= y_hi:
            vy = -vy
        if not x_lo <= cx + vx <= x_hi:
            vx = -vx
        cy = float(np.clip(cy + vy, y_lo, y_hi))
        cx = float(np.clip(cx + vx, x_lo, x_hi))
    return masks


def generate_masks(kind: str, length: int, height: int, width: int, seed=0,
                   max_step: int = 2) -> np.ndarray:
    """Dispatch on a maskset kind (``square_static``, ``square_drift``, ``object``)."""
    if kind == "square_static":
        return gen_square_masks(length, height, width, seed, "static")
    if kind == "square_drift":
        return gen_square_masks(length, height, width, seed, "drift", max_step=max_step)
    if kind == "object":
        return gen_object_masks(length, height, width, seed)
    raise ValueError(f"unknown mask kind '{kind}', expected one of {list(KNOWN_MASK_KINDS)}")


def mixed_masks(kinds, length: int, height: int, width: int, rng: np.random.Generator,
                max_step: int = 2) -> Tuple[str, np.ndarray]:
    """Draw a kind uniformly from ``kinds`` and generate a clip with the same generator."""
    kinds = tuple(kinds)
    kind = kinds[int(rng.integers(0, len(kinds)))]
    return kind, generate_masks(kind, length, height, width, rng, max_step=max_step)


def area_ratio(masks: np.ndarray, frame: Optional[int] = None) -> float:
    region = masks if frame is None else masks[frame]
    return float(np.asarray(region, dtype=np.float64).mean())

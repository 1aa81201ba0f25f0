"""
Synthetic translating-sprite scenes with exact ground-truth flow.

A scene is a static smooth background plus rectangular sprites with smooth
analytic textures moving at constant velocity. Sprites are composited in list
order (later sprites on top) with box-filter coverage, so integer velocities
render exactly and fractional ones blend at the edges. Flow labels carry the
velocity of the topmost surface covering at least half of a pixel.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)


@dataclass
class TextureSpec:
    """c(y, x) = base + amp * sin(2 pi (fy y + fx x) + phase), per RGB channel."""
    base: Tuple[float, float, float]
    amplitude: float = 0.2
    freq: Tuple[float, float] = (0.05, 0.07)
    phase: Tuple[float, float, float] = (0.0, 2.0, 4.0)

    def evaluate(self, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
        arg = 2 * np.pi * (self.freq[0] * ys + self.freq[1] * xs)
        channels = [self.base[c] + self.amplitude * np.sin(arg + self.phase[c]) for c in range(3)]
        return np.clip(np.stack(channels, axis=-1), 0.0, 1.0)


@dataclass
class Sprite:
    """Rectangle whose top-left pixel sits at (y + v t, x + u t) in frame t."""
    y: float
    x: float
    height: int
    width: int
    u: float
    v: float
    texture: TextureSpec

    def position(self, t: int) -> Tuple[float, float]:
        return self.y + self.v * t, self.x + self.u * t


@dataclass
class SyntheticScene:
    height: int
    width: int
    length: int
    background: TextureSpec
    sprites: List[Sprite] = field(default_factory=list)
    seed: int = 0


@dataclass
class SceneSample:
    """Rendered scene.

    Attributes:
        frames: [T, H, W, 3] in [0, 1]
        forward: [T-1, H, W, 2] flow t -> t+1 on frame t pixels
        backward: [T-1, H, W, 2] flow t+1 -> t on frame t+1 pixels
        occ_forward: [T-1, H, W] 1 where the forward correspondence is not visible
        occ_backward: [T-1, H, W] same for the backward flow
        surfaces: [T, H, W] topmost surface id (0 = background)
    """
    frames: np.ndarray
    forward: np.ndarray
    backward: np.ndarray
    occ_forward: np.ndarray
    occ_backward: np.ndarray
    surfaces: np.ndarray


def _coverage(coords: np.ndarray, start: float, extent: int) -> np.ndarray:
    """Overlap of each pixel's unit box with [start - 0.5, start + extent - 0.5]."""
    lo = np.maximum(coords - 0.5, start - 0.5)
    hi = np.minimum(coords + 0.5, start + extent - 0.5)
    return np.clip(hi - lo, 0.0, 1.0)


def _render(scene: SyntheticScene, t: int):
    h, w = scene.height, scene.width
    ys, xs = np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64)
    grid_y, grid_x = np.meshgrid(ys, xs, indexing="ij")
    image = scene.background.evaluate(grid_y, grid_x)
    surfaces = np.zeros((h, w), dtype=np.int64)
    velocity = np.zeros((h, w, 2))
    partial = np.zeros((h, w), dtype=bool)
    for idx, sprite in enumerate(scene.sprites, start=1):
        py, px = sprite.position(t)
        alpha = np.outer(_coverage(ys, py, sprite.height), _coverage(xs, px, sprite.width))
        if not alpha.any():
            continue
        texture = sprite.texture.evaluate(grid_y - py, grid_x - px)
        image = (1.0 - alpha[..., None]) * image + alpha[..., None] * texture
        top = alpha >= 0.5
        surfaces[top] = idx
        velocity[top] = (sprite.u, sprite.v)
        partial |= (alpha > 0) & (alpha < 1)
    return image, surfaces, velocity, partial


def _occlusion(flow: np.ndarray, src_ids: np.ndarray, dst_ids: np.ndarray,
               src_partial: np.ndarray, dst_partial: np.ndarray) -> np.ndarray:
    h, w = src_ids.shape
    ty = np.rint(np.arange(h)[:, None] + flow[..., 1]).astype(np.int64)
    tx = np.rint(np.arange(w)[None, :] + flow[..., 0]).astype(np.int64)
    outside = (ty < 0) | (ty >= h) | (tx < 0) | (tx >= w)
    cy, cx = np.clip(ty, 0, h - 1), np.clip(tx, 0, w - 1)
    mismatch = dst_ids[cy, cx] != src_ids
    edge = src_partial | dst_partial[cy, cx]
    return (outside | mismatch | edge).astype(np.uint8)


def gen_synthetic_scene(scene: SyntheticScene) -> SceneSample:
    """Render frames, bidirectional ground-truth flows and occlusion labels."""
    rendered = [_render(scene, t) for t in range(scene.length)]
    frames = np.stack([r[0] for r in rendered])
    surfaces = np.stack([r[1] for r in rendered])
    forward, backward, occ_f, occ_b = [], [], [], []
    for t in range(scene.length - 1):
        _, ids0, vel0, part0 = rendered[t]
        _, ids1, vel1, part1 = rendered[t + 1]
        fwd = vel0.copy()
        bwd = -vel1
        forward.append(fwd)
        backward.append(bwd)
        occ_f.append(_occlusion(fwd, ids0, ids1, part0, part1))
        occ_b.append(_occlusion(bwd, ids1, ids0, part1, part0))
    shape = (0, scene.height, scene.width)
    return SceneSample(
        frames=frames,
        forward=np.stack(forward) if forward else np.zeros(shape + (2,)),
        backward=np.stack(backward) if backward else np.zeros(shape + (2,)),
        occ_forward=np.stack(occ_f) if occ_f else np.zeros(shape, dtype=np.uint8),
        occ_backward=np.stack(occ_b) if occ_b else np.zeros(shape, dtype=np.uint8),
        surfaces=surfaces,
    )


def _random_texture(rng: np.random.Generator, low: float, high: float) -> TextureSpec:
    return TextureSpec(
        base=tuple(float(b) for b in rng.uniform(low, high, size=3)),
        amplitude=float(rng.uniform(0.08, 0.2)),
        freq=tuple(float(f) for f in rng.uniform(-0.12, 0.12, size=2)),
        phase=tuple(float(p) for p in rng.uniform(0, 2 * np.pi, size=3)),
    )


def random_scene(height: int, width: int, length: int, seed: int = 0, num_sprites: int = 2,
                 max_speed: int = 2, integer_velocity: bool = True,
                 rng: Optional[np.random.Generator] = None) -> SyntheticScene:
    """Draw a scene whose sprites stay fully inside the frame for every t."""
    rng = rng if rng is not None else np.random.default_rng(seed)
    background = _random_texture(rng, 0.25, 0.75)
    background.freq = tuple(f * 0.5 for f in background.freq)
    sprites = []
    span = max(length - 1, 1)
    for _ in range(num_sprites):
        sh = int(rng.integers(max(2, height // 6), max(3, height // 3) + 1))
        sw = int(rng.integers(max(2, width // 8), max(3, width // 4) + 1))
        velocity = []
        for extent, size in ((width, sw), (height, sh)):
            limit = min(max_speed, (extent - size) / span)
            if integer_velocity:
                limit = int(np.floor(limit))
                velocity.append(float(rng.integers(-limit, limit + 1)) if limit > 0 else 0.0)
            else:
                velocity.append(float(rng.uniform(-limit, limit)))
        u, v = velocity
        y = _start(rng, height - sh, v * span, integer_velocity)
        x = _start(rng, width - sw, u * span, integer_velocity)
        sprites.append(Sprite(y, x, sh, sw, u, v, _random_texture(rng, 0.0, 1.0)))
    return SyntheticScene(height, width, length, background, sprites, seed)


def _start(rng: np.random.Generator, room: int, travel: float, integer: bool) -> float:
    lo = max(0.0, -travel)
    hi = min(float(room), room - travel)
    if integer:
        return float(rng.integers(int(np.ceil(lo)), int(np.floor(hi)) + 1))
    return float(rng.uniform(lo, hi))

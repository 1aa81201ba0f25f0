"""
Windowed multi-head self-attention variants over token maps [N, T, gh, gw, C].

- LargeWindowAttention: the grid is divided into zones (2x2 by default) and
  every zone attends across all frames' tokens of that zone.
- TemporalDeformableAttention: neighbour token maps are composed to features,
  backward-warped to the target frame by completed flows and split back; each
  target window then attends to [warped previous, target, warped next].
- DualPerspectiveAttention: per-frame windows whose keys are the window's own
  tokens plus global tokens condensed by a strided depthwise conv.

Grids that do not divide into windows are zero-padded; padded keys are masked
out with a large negative bias and padded queries are cropped away.
"""
from __future__ import annotations

import logging
import math
from typing import Optional, Tuple

import numpy as np

from .errors import ShapeError
from .functional import conv2d, grid_sample_bilinear, softmax_attention
from .nn import Linear, Module, kaiming_uniform
from .tensor import DEFAULT_DTYPE, Parameter, Tensor, concat, pad, permute, reshape, take
from .tokens import TokenGeometry, soft_composition, soft_split

logger = logging.getLogger(__name__)

MASK_BIAS = -1e9


# ----------------------------------------------------------------- helpers
def window_grid(height: int, width: int, window: Tuple[int, int]) -> Tuple[int, int]:
    return math.ceil(height / window[0]), math.ceil(width / window[1])


def partition(x: Tensor, window: Tuple[int, int]) -> Tuple[Tensor, np.ndarray]:
    """[B, T, H, W, C] -> windows [B * nh * nw, T * wh * ww, C] and token validity [nh * nw, T * wh * ww]."""
    b, t, h, w, c = x.shape
    wh, ww = window
    nh, nw = window_grid(h, w, window)
    ph, pw = nh * wh - h, nw * ww - w
    if ph or pw:
        x = pad(x, ((0, 0), (0, 0), (0, ph), (0, pw), (0, 0)))
    x = reshape(x, (b, t, nh, wh, nw, ww, c))
    x = permute(x, (0, 2, 4, 1, 3, 5, 6))
    windows = reshape(x, (b * nh * nw, t * wh * ww, c))
    valid = np.pad(np.ones((t, h, w), dtype=bool), ((0, 0), (0, ph), (0, pw)))
    valid = valid.reshape(t, nh, wh, nw, ww).transpose(1, 3, 0, 2, 4).reshape(nh * nw, t * wh * ww)
    return windows, valid


def merge(windows: Tensor, shape: Tuple[int, int, int, int, int], window: Tuple[int, int]) -> Tensor:
    """Inverse of ``partition`` (padding cropped)."""
    b, t, h, w, c = shape
    wh, ww = window
    nh, nw = window_grid(h, w, window)
    x = reshape(windows, (b, nh, nw, t, wh, ww, c))
    x = reshape(permute(x, (0, 3, 1, 4, 2, 5, 6)), (b, t, nh * wh, nw * ww, c))
    if nh * wh != h or nw * ww != w:
        x = x[:, :, :h, :w, :]
    return x


class AttentionProjection(Module):
    """Q/K/V/output projections shared by every attention variant."""

    def __init__(self, channels: int, heads: int, rng: np.random.Generator, dtype=DEFAULT_DTYPE):
        super().__init__()
        if channels % heads:
            raise ShapeError(f"channels {channels} not divisible by heads {heads}")
        self.heads = heads
        self.query = Linear(channels, channels, rng, dtype=dtype)
        self.key = Linear(channels, channels, rng, dtype=dtype)
        self.value = Linear(channels, channels, rng, dtype=dtype)
        self.out = Linear(channels, channels, rng, dtype=dtype)

    def _split(self, x: Tensor) -> Tensor:
        b, length, c = x.shape
        return permute(reshape(x, (b, length, self.heads, c // self.heads)), (0, 2, 1, 3))

    def attend(self, queries: Tensor, keys: Tensor, key_valid: Optional[np.ndarray] = None,
               return_weights: bool = False):
        """Multi-head attention of [B, Lq, C] queries over [B, Lk, C] keys/values.

        Args:
            key_valid: Optional boolean [B, Lk] (or broadcastable); False keys get zero weight
        """
        q = self._split(self.query(queries))
        k = self._split(self.key(keys))
        v = self._split(self.value(keys))
        bias = None
        if key_valid is not None:
            valid = np.broadcast_to(np.asarray(key_valid, dtype=bool), (keys.shape[0], keys.shape[1]))
            bias = np.where(valid, 0.0, MASK_BIAS)[:, None, None, :]
        out, weights = softmax_attention(q, k, v, key_bias=bias, return_weights=True)
        b, _, lq, _ = out.shape
        out = self.out(reshape(permute(out, (0, 2, 1, 3)), (b, lq, queries.shape[-1])))
        return (out, weights) if return_weights else out


# ------------------------------------------------------------ large window
class LargeWindowAttention(Module):
    """Zone attention across all frames (zones x zones partition of the grid)."""

    def __init__(self, channels: int, heads: int, rng: np.random.Generator, zones: Tuple[int, int] = (2, 2),
                 dtype=DEFAULT_DTYPE):
        super().__init__()
        self.zones = tuple(zones)
        self.proj = AttentionProjection(channels, heads, rng, dtype)

    def zone_size(self, height: int, width: int) -> Tuple[int, int]:
        return math.ceil(height / self.zones[0]), math.ceil(width / self.zones[1])

    def forward(self, x: Tensor, return_weights: bool = False):
        n, t, h, w, c = x.shape
        window = self.zone_size(h, w)
        windows, valid = partition(x, window)
        key_valid = np.tile(valid, (n, 1))
        out, weights = self.proj.attend(windows, windows, key_valid, return_weights=True)
        out = merge(out, x.shape, window)
        return (out, weights) if return_weights else out


# -------------------------------------------------------- temporal deformable
class TemporalDeformableAttention(Module):
    """Window attention with keys from flow-aligned neighbour frames.

    The window side is half the large-window (zone) side, rounded up.
    ``flows_prev[:, t]`` is F_{t->t-1} and ``flows_next[:, t]`` is F_{t->t+1}
    at feature resolution; ``None`` skips warping (the unwarped variant).
    Boundary frames use the single neighbour they have.
    """

    def __init__(self, channels: int, heads: int, geometry: TokenGeometry, rng: np.random.Generator,
                 fold_channels: int = 8, zones: Tuple[int, int] = (2, 2), dtype=DEFAULT_DTYPE):
        super().__init__()
        self.geometry = geometry
        self.zones = tuple(zones)
        self.fold_channels = fold_channels
        self.proj = AttentionProjection(channels, heads, rng, dtype)
        self.to_patches = Linear(channels, fold_channels * geometry.patch_area, rng, dtype=dtype)
        self.from_patches = Linear(fold_channels * geometry.patch_area, channels, rng, dtype=dtype)

    def window_size(self, height: int, width: int) -> Tuple[int, int]:
        zh, zw = math.ceil(height / self.zones[0]), math.ceil(width / self.zones[1])
        return math.ceil(zh / 2), math.ceil(zw / 2)

    def aligned_neighbours(self, x: Tensor, flows_prev=None, flows_next=None) -> Tuple[Tensor, Tensor]:
        """Token maps of frames t-1 and t+1 warped onto frame t (clamped at the sequence ends)."""
        n, t, gh, gw, c = x.shape
        patches = self.to_patches(reshape(x, (n * t, gh, gw, c)))
        feats = soft_composition(patches, self.geometry)
        fh, fw = feats.shape[2], feats.shape[3]
        feats = reshape(feats, (n, t, self.fold_channels, fh, fw))

        def shifted(offset: int, flows) -> Tensor:
            idx = [min(max(i + offset, 0), t - 1) for i in range(t)]
            moved = reshape(take(feats, idx, axis=1), (n * t, self.fold_channels, fh, fw))
            if flows is not None:
                uv = flows.uv if hasattr(flows, "uv") else flows
                flow = np.asarray(uv, dtype=feats.dtype).reshape(n * t, fh, fw, 2)
                moved = grid_sample_bilinear(moved, flow)
            tokens = self.from_patches(soft_split(moved, self.geometry))
            return reshape(tokens, (n, t, gh, gw, c))

        return shifted(-1, flows_prev), shifted(1, flows_next)

    def forward(self, x: Tensor, flows_prev=None, flows_next=None, return_weights: bool = False):
        n, t, h, w, c = x.shape
        window = self.window_size(h, w)
        prev, nxt = self.aligned_neighbours(x, flows_prev, flows_next)

        def frames_as_batch(z: Tensor) -> Tensor:
            return reshape(z, (n * t, 1, h, w, c))

        target_w, valid = partition(frames_as_batch(x), window)
        prev_w, _ = partition(frames_as_batch(prev), window)
        next_w, _ = partition(frames_as_batch(nxt), window)
        keys = concat([prev_w, target_w, next_w], axis=1)

        n_windows = valid.shape[0]
        frame_index = np.repeat(np.tile(np.arange(t), n), n_windows)
        has_prev = (frame_index > 0)[:, None]
        has_next = (frame_index < t - 1)[:, None]
        base = np.tile(valid, (n * t, 1))
        key_valid = np.concatenate([base & has_prev, base, base & has_next], axis=1)

        out, weights = self.proj.attend(target_w, keys, key_valid, return_weights=True)
        out = reshape(merge(out, (n * t, 1, h, w, c), window), x.shape)
        return (out, weights) if return_weights else out


# ------------------------------------------------------- dual perspective
def dp_key_count(height: int, width: int, window_h: int, window_w: int, stride: int) -> int:
    """Keys per window: ceil(H/s) * ceil(W/s) global tokens plus h * w local tokens."""
    return math.ceil(height / stride) * math.ceil(width / stride) + window_h * window_w


def dp_reduction_threshold(height: int, width: int, window_h: int, window_w: int) -> float:
    """ceil(sqrt(HW / (HW - hw))), the closed-form stride bound for fewer keys than all-pair attention.

    The bound treats the global grid as HW / s^2 tokens, so it only guarantees a
    reduction when s divides both extents. ``dp_reduces`` is the exact test.
    """
    area, local = height * width, window_h * window_w
    if local >= area:
        return math.inf
    return math.ceil(math.sqrt(area / (area - local)))


def dp_reduces(height: int, width: int, window_h: int, window_w: int, stride: int) -> bool:
    return dp_key_count(height, width, window_h, window_w, stride) < height * width


class DualPerspectiveAttention(Module):
    """Local window tokens plus condensed global tokens as keys (per frame)."""

    def __init__(self, channels: int, heads: int, rng: np.random.Generator, window: int = 8,
                 global_stride: int = 4, dtype=DEFAULT_DTYPE):
        super().__init__()
        self.window = (window, window)
        self.global_stride = global_stride
        self.proj = AttentionProjection(channels, heads, rng, dtype)
        k = global_stride
        self.global_weight = Parameter(kaiming_uniform(rng, (channels, 1, k, k), k * k, dtype=dtype))
        self.global_bias = Parameter(np.zeros(channels, dtype=dtype))

    def global_tokens(self, frames: Tensor) -> Tensor:
        """[B, H, W, C] -> [B, ceil(H/s) * ceil(W/s), C] via a stride-s depthwise conv."""
        b, h, w, c = frames.shape
        s = self.global_stride
        grid = permute(frames, (0, 3, 1, 2))
        ph, pw = math.ceil(h / s) * s - h, math.ceil(w / s) * s - w
        if ph or pw:
            grid = pad(grid, ((0, 0), (0, 0), (0, ph), (0, pw)))
        condensed = conv2d(grid, self.global_weight, self.global_bias, stride=s, groups=c)
        gh, gw = condensed.shape[2], condensed.shape[3]
        return reshape(permute(condensed, (0, 2, 3, 1)), (b, gh * gw, c))

    def forward(self, x: Tensor, return_weights: bool = False):
        n, t, h, w, c = x.shape
        frames = reshape(x, (n * t, h, w, c))
        globals_ = self.global_tokens(frames)
        windows, valid = partition(reshape(x, (n * t, 1, h, w, c)), self.window)
        n_windows = valid.shape[0]
        g = globals_.shape[1]
        globals_rep = reshape(take(reshape(globals_, (n * t, 1, g, c)), [0] * n_windows, axis=1),
                              (n * t * n_windows, g, c))
        keys = concat([windows, globals_rep], axis=1)
        key_valid = np.concatenate([np.tile(valid, (n * t, 1)),
                                    np.ones((n * t * n_windows, g), dtype=bool)], axis=1)
        out, weights = self.proj.attend(windows, keys, key_valid, return_weights=True)
        out = reshape(merge(out, (n * t, 1, h, w, c), self.window), x.shape)
        return (out, weights) if return_weights else out

"""
Soft split / soft composition between feature maps and token maps.

A token map is a Tensor [N, T, gh, gw, C] together with the TokenGeometry
(kernel, stride, padding and feature extent) that produced it. Soft split
extracts overlapping patches; soft composition sums patches back and divides
every pixel by the number of patches covering it, so composing a split is
the identity.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import ShapeError
from .functional import conv2d, conv_output_size, fold, unfold
from .nn import Linear, Module, kaiming_uniform
from .tensor import DEFAULT_DTYPE, Parameter, Tensor, permute, reshape

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TokenGeometry:
    """Patch geometry plus the feature extent it tiles."""
    height: int
    width: int
    kernel: int = 7
    stride: int = 3
    padding: int = 3

    @property
    def grid(self) -> Tuple[int, int]:
        gh = conv_output_size(self.height, self.kernel, self.stride, self.padding)
        gw = conv_output_size(self.width, self.kernel, self.stride, self.padding)
        if gh < 1 or gw < 1:
            raise ShapeError(f"feature extent {(self.height, self.width)} admits no {self.kernel}x{self.kernel} patch")
        return gh, gw

    @property
    def patch_area(self) -> int:
        return self.kernel * self.kernel

    def overlap_counts(self, dtype=DEFAULT_DTYPE) -> np.ndarray:
        """Number of patches covering each feature pixel, [H, W] (>= 1)."""
        gh, gw = self.grid
        ones = Tensor(np.ones((1, self.patch_area, gh * gw), dtype=dtype))
        counts = fold(ones, (self.height, self.width), self.kernel, self.stride, self.padding).data[0, 0]
        return np.maximum(counts, 1.0)


def soft_split(features: Tensor, geometry: TokenGeometry) -> Tensor:
    """[B, C, H, W] -> [B, gh, gw, C*k*k] raw patch tokens."""
    b, c, h, w = features.shape
    if (h, w) != (geometry.height, geometry.width):
        raise ShapeError(f"soft_split: features {(h, w)} do not match geometry {(geometry.height, geometry.width)}")
    gh, gw = geometry.grid
    cols = unfold(features, geometry.kernel, geometry.stride, geometry.padding)
    return reshape(permute(cols, (0, 2, 1)), (b, gh, gw, c * geometry.patch_area))


def soft_composition(tokens: Tensor, geometry: TokenGeometry) -> Tensor:
    """[B, gh, gw, C*k*k] -> [B, C, H, W], overlap-normalized."""
    b, gh, gw, ck = tokens.shape
    if (gh, gw) != geometry.grid:
        raise ShapeError(f"soft_composition: token grid {(gh, gw)} does not match geometry grid {geometry.grid}")
    if ck % geometry.patch_area:
        raise ShapeError(f"soft_composition: token width {ck} not divisible by patch area {geometry.patch_area}")
    cols = permute(reshape(tokens, (b, gh * gw, ck)), (0, 2, 1))
    summed = fold(cols, (geometry.height, geometry.width), geometry.kernel, geometry.stride, geometry.padding)
    return summed / Tensor(geometry.overlap_counts(tokens.dtype))


class SoftSplit(Module):
    """Patch extraction followed by a linear embedding to ``hidden`` channels."""

    def __init__(self, in_channels: int, hidden: int, geometry: TokenGeometry, rng: np.random.Generator,
                 dtype=DEFAULT_DTYPE):
        super().__init__()
        self.geometry = geometry
        self.embedding = Linear(in_channels * geometry.patch_area, hidden, rng, dtype=dtype)

    def forward(self, features: Tensor) -> Tensor:
        """[N, T, C, H, W] -> token map [N, T, gh, gw, hidden]."""
        n, t, c, h, w = features.shape
        tokens = self.embedding(soft_split(reshape(features, (n * t, c, h, w)), self.geometry))
        gh, gw = self.geometry.grid
        return reshape(tokens, (n, t, gh, gw, tokens.shape[-1]))


class SoftComposition(Module):
    """Linear projection to patch values followed by overlap-normalized folding."""

    def __init__(self, hidden: int, out_channels: int, geometry: TokenGeometry, rng: np.random.Generator,
                 dtype=DEFAULT_DTYPE):
        super().__init__()
        self.geometry = geometry
        self.embedding = Linear(hidden, out_channels * geometry.patch_area, rng, dtype=dtype)

    def forward(self, tokens: Tensor) -> Tensor:
        """Token map [N, T, gh, gw, hidden] -> [N, T, C, H, W]."""
        n, t, gh, gw, _ = tokens.shape
        patches = self.embedding(reshape(tokens, (n * t, gh, gw, tokens.shape[-1])))
        features = soft_composition(patches, self.geometry)
        return reshape(features, (n, t) + features.shape[1:])


class PositionalEmbedding(Module):
    """x + depthwise3x3(x) on the token grid; works for any grid extent."""

    def __init__(self, channels: int, rng: np.random.Generator, dtype=DEFAULT_DTYPE):
        super().__init__()
        self.weight = Parameter(kaiming_uniform(rng, (channels, 1, 3, 3), 9, dtype=dtype))
        self.bias = Parameter(np.zeros(channels, dtype=dtype))

    def forward(self, tokens: Tensor) -> Tensor:
        n, t, gh, gw, c = tokens.shape
        grid = permute(reshape(tokens, (n * t, gh, gw, c)), (0, 3, 1, 2))
        embed = conv2d(grid, self.weight, self.bias, padding=1, groups=c)
        embed = reshape(permute(embed, (0, 2, 3, 1)), tokens.shape)
        return tokens + embed

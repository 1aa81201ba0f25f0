"""
Flow-guided feature propagation between local frames.

Each frame gathers features from its neighbours in two branches: the forward
branch looks at t-1 and t-2, the backward branch at t+1 and t+2. A neighbour
is backward-warped by the completed flow, then refined by a modulated
deformable 3x3 sampling whose offsets are residuals on top of the flow. The
two branches are merged by a 1x1 fusion conv and added to the frame's own
features. Frames at the sequence ends fall back to first-order neighbours.
"""
from __future__ import annotations

import logging
from typing import Optional, Tuple

import numpy as np

from .errors import ShapeError
from .flow_io import FlowField
from .flow_ops import compose_flows, resize_flow
from .functional import grid_sample_bilinear, lrelu
from .nn import Conv2d, Module, kaiming_uniform
from .tensor import DEFAULT_DTYPE, Parameter, Tensor, concat, matmul, permute, reshape, stack

logger = logging.getLogger(__name__)

KERNEL_TAPS = tuple((ky - 1, kx - 1) for ky in range(3) for kx in range(3))


def second_order_flows(adjacent: np.ndarray, step: int) -> np.ndarray:
    """Chain adjacent flows into two-step flows.

    Args:
        adjacent: [N, T, H, W, 2]; ``adjacent[:, t]`` maps frame t to frame t + step
        step: -1 for flows towards the previous frame, +1 towards the next

    Returns:
        [N, T, H, W, 2] flows t -> t + 2 * step (zeros where t + 2 * step is outside the sequence)
    """
    adjacent = np.asarray(adjacent, dtype=np.float64)
    out = np.zeros_like(adjacent)
    n, t = adjacent.shape[:2]
    for b in range(n):
        for i in range(t):
            j = i + step
            if 0 <= i + 2 * step < t:
                out[b, i] = compose_flows(FlowField(adjacent[b, i]), FlowField(adjacent[b, j])).uv
    return out


class DeformableAlignment(Module):
    """Flow-guided modulated deformable alignment of one neighbour onto a target."""

    def __init__(self, channels: int, rng: np.random.Generator, dtype=DEFAULT_DTYPE):
        super().__init__()
        self.channels = channels
        self.offset_hidden = Conv2d(2 * channels + 2, channels, 3, rng, padding=1, dtype=dtype)
        self.offset_out = Conv2d(channels, 3 * len(KERNEL_TAPS), 3, rng, padding=1, zero_init=True, dtype=dtype)
        self.weight = Parameter(kaiming_uniform(rng, (channels, channels, 3, 3), channels * 9, dtype=dtype))
        self.bias = Parameter(np.zeros(channels, dtype=dtype))

    def forward(self, target: Tensor, neighbour: Tensor, flow: np.ndarray) -> Tensor:
        """target/neighbour [B, C, H, W], flow [B, H, W, 2] (target -> neighbour)."""
        b, c, h, w = neighbour.shape
        flow = np.asarray(flow, dtype=neighbour.dtype)
        if flow.shape != (b, h, w, 2):
            raise ShapeError(f"alignment flow {flow.shape} does not match features {neighbour.shape}")
        warped = grid_sample_bilinear(neighbour, flow)
        flow_map = Tensor(np.ascontiguousarray(flow.transpose(0, 3, 1, 2)))
        hidden = lrelu(self.offset_hidden(concat([target, warped, flow_map], axis=1)))
        predicted = self.offset_out(hidden)
        taps = len(KERNEL_TAPS)
        modulation = predicted[:, 2 * taps:].sigmoid() * 2.0
        samples = []
        for k, (dy, dx) in enumerate(KERNEL_TAPS):
            residual = permute(predicted[:, 2 * k:2 * k + 2], (0, 2, 3, 1))
            tap_flow = residual + (flow + np.array([dx, dy], dtype=flow.dtype))
            sampled = grid_sample_bilinear(neighbour, tap_flow)
            samples.append(sampled * modulation[:, k:k + 1])
        columns = reshape(stack(samples, axis=2), (b, c * taps, h * w))
        out = matmul(reshape(self.weight, (c, c * taps)), columns)
        return reshape(out, (b, c, h, w)) + reshape(self.bias, (1, c, 1, 1))


class FlowGuidedPropagation(Module):
    """Bidirectional second-order propagation over local-frame features [N, T, C, H, W]."""

    def __init__(self, channels: int, rng: np.random.Generator, dtype=DEFAULT_DTYPE):
        super().__init__()
        self.channels = channels
        self.forward_align = DeformableAlignment(channels, rng, dtype)
        self.backward_align = DeformableAlignment(channels, rng, dtype)
        self.forward_merge = Conv2d(2 * channels, channels, 1, rng, dtype=dtype)
        self.backward_merge = Conv2d(2 * channels, channels, 1, rng, dtype=dtype)
        self.fusion = Conv2d(2 * channels, channels, 1, rng, dtype=dtype)

    def _branch(self, features: Tensor, t: int, step: int, align: DeformableAlignment, merge: Conv2d,
                first: np.ndarray, second: np.ndarray) -> Optional[Tensor]:
        length = features.shape[1]
        near, far = t + step, t + 2 * step
        if not 0 <= near < length:
            return None
        target = features[:, t]
        aligned_near = align(target, features[:, near], first[:, t])
        aligned_far = align(target, features[:, far], second[:, t]) if 0 <= far < length else aligned_near
        return merge(concat([aligned_near, aligned_far], axis=1))

    def forward(self, features: Tensor, flows_prev: np.ndarray, flows_next: np.ndarray) -> Tensor:
        """
        Args:
            features: [N, T, C, H, W] local-frame features
            flows_prev: [N, T, H, W, 2] completed flows t -> t-1 (entry 0 unused)
            flows_next: [N, T, H, W, 2] completed flows t -> t+1 (entry T-1 unused)
        """
        n, length, c, h, w = features.shape
        for name, flows in (("flows_prev", flows_prev), ("flows_next", flows_next)):
            if np.shape(flows) != (n, length, h, w, 2):
                raise ShapeError(f"{name} {np.shape(flows)} does not match features {features.shape}")
        prev2 = second_order_flows(flows_prev, -1)
        next2 = second_order_flows(flows_next, 1)
        zeros = Tensor(np.zeros((n, c, h, w), dtype=features.dtype))
        outputs = []
        for t in range(length):
            fwd = self._branch(features, t, -1, self.forward_align, self.forward_merge, flows_prev, prev2)
            bwd = self._branch(features, t, 1, self.backward_align, self.backward_merge, flows_next, next2)
            merged = self.fusion(concat([fwd if fwd is not None else zeros,
                                         bwd if bwd is not None else zeros], axis=1))
            outputs.append(features[:, t] + merged)
        return stack(outputs, axis=1)


def feature_flows(flows_prev: np.ndarray, flows_next: np.ndarray, size: Tuple[int, int]) -> Tuple[np.ndarray, np.ndarray]:
    """Resize [N, T, H, W, 2] flow stacks to a feature extent (displacements rescaled)."""
    def resize(stack_):
        stack_ = np.asarray(stack_, dtype=np.float64)
        n, t = stack_.shape[:2]
        return np.stack([np.stack([resize_flow(FlowField(stack_[b, i]), size).uv for i in range(t)])
                         for b in range(n)])

    return resize(flows_prev), resize(flows_next)

"""
Local-aggregation flow completion network.

A short sequence of 2n+1 Laplacian-initialized flows (the middle one is the
target) is encoded by pseudo-3D blocks: a per-frame spatial conv followed by
a temporal conv, with a residual connection. Shrink blocks collapse the
sequence to the target instant on the bottleneck and on every skip, and a 2D
decoder produces the completed target flow. A four-layer residual edge head
predicts motion-boundary probabilities from the completed flow.

Tensor layout inside the network is [N, C, T, H, W] / [N, C, H, W]; flows
enter and leave as channels (u, v).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from .errors import ShapeError
from .flow_io import FlowField
from .flow_ops import canny, laplacian_fill
from .functional import (bce, conv1d_temporal, grid_sample_bilinear, lrelu, masked_l1,
                         replicate_pad2d, resize_bilinear)
from .nn import Conv2d, Module, ModuleList, kaiming_uniform
from .tensor import DEFAULT_DTYPE, Parameter, Tensor, as_tensor, concat, mean, permute, reshape, take, tabs

logger = logging.getLogger(__name__)


@dataclass
class LafcConfig:
    """Flow-completion network and loss settings.

    Attributes:
        local_radius: n, the sequence holds 2n+1 flows (n=0 is the single-flow ablation)
        interval: Frames between consecutive flows of the sequence
        base_channels: Width of the first encoder stage (stages use x1, x2, x4)
        use_edge_head: Build and supervise the motion-boundary head
        lambda_*: Weights of L_c, L_v, L_s, L_w, L_e in L_F
    """
    local_radius: int = 1
    interval: int = 3
    base_channels: int = 32
    use_edge_head: bool = True
    lambda_c: float = 1.0
    lambda_v: float = 1.0
    lambda_s: float = 0.5
    lambda_w: float = 0.01
    lambda_e: float = 1.0
    canny_sigma: float = 1.0
    canny_low: float = 0.05
    canny_high: float = 0.1
    fb_alpha: float = 0.01
    fb_beta: float = 0.5

    @property
    def sequence_length(self) -> int:
        return 2 * self.local_radius + 1

    @property
    def weights(self) -> Dict[str, float]:
        return {"L_c": self.lambda_c, "L_v": self.lambda_v, "L_s": self.lambda_s,
                "L_w": self.lambda_w, "L_e": self.lambda_e}


def per_frame(x: Tensor, fn) -> Tensor:
    """Apply a [B, C, H, W] -> [B, C', H', W'] map to every timestep of [N, C, T, H, W]."""
    n, c, t, h, w = x.shape
    frames = reshape(permute(x, (0, 2, 1, 3, 4)), (n * t, c, h, w))
    out = fn(frames)
    _, c2, h2, w2 = out.shape
    return permute(reshape(out, (n, t, c2, h2, w2)), (0, 2, 1, 3, 4))


class TemporalConv(Module):
    """Temporal-only convolution, weight [C_out, C_in, k_t]."""

    def __init__(self, in_channels: int, out_channels: int, kernel: int, rng: np.random.Generator,
                 padding: int = 0, dtype=DEFAULT_DTYPE):
        super().__init__()
        self.weight = Parameter(kaiming_uniform(rng, (out_channels, in_channels, kernel), in_channels * kernel, dtype=dtype))
        self.bias = Parameter(np.zeros(out_channels, dtype=dtype))
        self.padding = padding

    def forward(self, x: Tensor) -> Tensor:
        return conv1d_temporal(x, self.weight, self.bias, padding_t=self.padding)


class P3DBlock(Module):
    """out = TC(SC(x)) + x, with SC = per-frame 3x3 conv + LeakyReLU(0.2).

    A 1x1 projection replaces the identity on the residual path when channels
    or stride change. ``shrink`` uses a temporal kernel spanning the whole
    sequence without padding (T -> 1) and takes the residual from the centre frame.
    """

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator, stride: int = 1,
                 shrink: bool = False, sequence_length: int = 3, temporal_kernel: int = 3,
                 dtype=DEFAULT_DTYPE):
        super().__init__()
        self.sc = Conv2d(in_channels, out_channels, 3, rng, stride=stride, padding=1, dtype=dtype)
        kernel = sequence_length if shrink else temporal_kernel
        self.tc = TemporalConv(out_channels, out_channels, kernel, rng, padding=0 if shrink else kernel // 2, dtype=dtype)
        self.shrink = shrink
        self.sequence_length = sequence_length
        self.projection = None
        if in_channels != out_channels or stride != 1:
            self.projection = Conv2d(in_channels, out_channels, 1, rng, stride=stride, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 5:
            raise ShapeError(f"P3DBlock expects [N,C,T,H,W], got {x.shape}")
        if self.shrink and x.shape[2] != self.sequence_length:
            raise ShapeError(f"shrink block expects T={self.sequence_length}, got {x.shape}")
        residual = x
        if self.shrink:
            residual = take(x, [x.shape[2] // 2], axis=2)
        if self.projection is not None:
            residual = per_frame(residual, self.projection)
        out = self.tc(per_frame(x, lambda f: lrelu(self.sc(f))))
        return out + residual


class EdgeHead(Module):
    """Four convs with a residual connection, sigmoid output in [0, 1]."""

    def __init__(self, rng: np.random.Generator, channels: int = 16, dtype=DEFAULT_DTYPE):
        super().__init__()
        self.projection = Conv2d(2, channels, 3, rng, padding=1, dtype=dtype)
        self.mid1 = Conv2d(channels, channels, 3, rng, padding=1, dtype=dtype)
        self.mid2 = Conv2d(channels, channels, 3, rng, padding=1, dtype=dtype)
        self.out = Conv2d(channels, 1, 1, rng, dtype=dtype)

    def forward(self, flow: Tensor) -> Tensor:
        x = lrelu(self.projection(flow))
        y = self.mid2(lrelu(self.mid1(x)))
        return self.out(lrelu(x + y)).sigmoid()


@dataclass
class LafcOutput:
    """Completed target flow.

    Attributes:
        flow: Raw network output [N, 2, H, W]
        composited: M * flow + (1 - M) * input target flow
        edge: Boundary probabilities [N, 1, H, W] (None without edge head)
    """
    flow: Tensor
    composited: Tensor
    edge: Optional[Tensor]

    def to_flow_fields(self, composited: bool = True) -> List[FlowField]:
        data = (self.composited if composited else self.flow).data
        return [FlowField(np.ascontiguousarray(d.transpose(1, 2, 0))) for d in data]


class LafcNet(Module):
    """Encoder 3 -> C -> 2C (s2) -> 4C (s2), shrink bottleneck and skips, 2D decoder."""

    def __init__(self, config: LafcConfig, rng: np.random.Generator, dtype=DEFAULT_DTYPE):
        super().__init__()
        self.config = config
        c = config.base_channels
        t = config.sequence_length
        self.stage1 = P3DBlock(3, c, rng, sequence_length=t, dtype=dtype)
        self.stage2 = P3DBlock(c, 2 * c, rng, stride=2, sequence_length=t, dtype=dtype)
        self.stage3 = P3DBlock(2 * c, 4 * c, rng, stride=2, sequence_length=t, dtype=dtype)
        self.bottleneck = P3DBlock(4 * c, 4 * c, rng, shrink=True, sequence_length=t, dtype=dtype)
        self.skips = ModuleList([
            P3DBlock(c, c, rng, shrink=True, sequence_length=t, dtype=dtype),
            P3DBlock(2 * c, 2 * c, rng, shrink=True, sequence_length=t, dtype=dtype),
        ])
        self.up2 = Conv2d(4 * c, 2 * c, 3, rng, padding=1, dtype=dtype)
        self.fuse2 = Conv2d(2 * c, 2 * c, 3, rng, padding=1, dtype=dtype)
        self.up1 = Conv2d(2 * c, c, 3, rng, padding=1, dtype=dtype)
        self.fuse1 = Conv2d(c, c, 3, rng, padding=1, dtype=dtype)
        self.head = Conv2d(c, 2, 3, rng, padding=1, zero_init=True, dtype=dtype)
        self.edge_head = EdgeHead(rng, dtype=dtype) if config.use_edge_head else None

    def forward(self, flows, masks) -> LafcOutput:
        """
        Args:
            flows: [N, 2n+1, H, W, 2] Laplacian-initialized flows (middle = target)
            masks: [N, 2n+1, H, W] hole masks (1 = corrupted)

        Raises:
            ShapeError: wrong sequence length, mismatched masks, H or W not divisible by 4
        """
        flows = np.asarray(flows.data if isinstance(flows, Tensor) else flows, dtype=self.head.weight.dtype)
        masks = np.asarray(masks, dtype=flows.dtype)
        if flows.ndim != 5 or flows.shape[-1] != 2:
            raise ShapeError(f"LAFC expects flows [N, T, H, W, 2], got {flows.shape}")
        n, t, h, w, _ = flows.shape
        if t != self.config.sequence_length:
            raise ShapeError(f"LAFC expects a sequence of {self.config.sequence_length} flows, got {t}")
        if masks.shape != flows.shape[:4]:
            raise ShapeError(f"LAFC masks {masks.shape} do not match flows {flows.shape}")
        if h % 4 or w % 4:
            raise ShapeError(f"LAFC needs H and W divisible by 4, got {(h, w)}")

        stacked = np.concatenate([flows, masks[..., None]], axis=-1).transpose(0, 4, 1, 2, 3)
        x = Tensor(np.ascontiguousarray(stacked))
        e1 = self.stage1(x)
        e2 = self.stage2(e1)
        e3 = self.stage3(e2)

        def collapse(z: Tensor) -> Tensor:
            return reshape(z, (z.shape[0], z.shape[1], z.shape[3], z.shape[4]))

        b = collapse(self.bottleneck(e3))
        s1 = collapse(self.skips[0](e1))
        s2 = collapse(self.skips[1](e2))

        d = lrelu(self.up2(resize_bilinear(b, (h // 2, w // 2))))
        d = lrelu(self.fuse2(d + s2))
        d = lrelu(self.up1(resize_bilinear(d, (h, w))))
        d = lrelu(self.fuse1(d + s1))
        flow = self.head(d)

        centre = t // 2
        hole = masks[:, centre][:, None]
        target = flows[:, centre].transpose(0, 3, 1, 2)
        composited = flow * Tensor(hole) + Tensor(np.ascontiguousarray(target * (1.0 - hole)))
        edge = self.edge_head(flow) if self.edge_head is not None else None
        return LafcOutput(flow, composited, edge)


def prepare_inputs(flows: Sequence[FlowField], masks: Sequence[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """Zero the holes, Laplacian-fill every flow and stack to [1, T, H, W, 2] / [1, T, H, W]."""
    filled = []
    for flow, mask in zip(flows, masks):
        corrupted = flow.copy()
        corrupted.uv[np.asarray(mask).astype(bool)] = 0.0
        filled.append(laplacian_fill(corrupted, mask).uv)
    return np.stack(filled)[None], np.stack([np.asarray(m) for m in masks])[None]


# ------------------------------------------------------------------- losses
@dataclass
class FlowLosses:
    terms: Dict[str, Tensor]
    total: Tensor
    flags: Set[str] = field(default_factory=set)

    def values(self) -> Dict[str, float]:
        out = {name: float(t.item()) for name, t in self.terms.items()}
        out["L_F"] = float(self.total.item())
        return out


def smoothness_loss(flow: Tensor) -> Tensor:
    """mean|d/dx F| + mean|d/dy F| + mean|5-point Laplacian of F|.

    Forward differences and the Laplacian read replicate-padded borders, so
    the last column/row has zero forward difference.
    """
    p = replicate_pad2d(flow, 1, 1)
    centre = p[:, :, 1:-1, 1:-1]
    right = p[:, :, 1:-1, 2:]
    left = p[:, :, 1:-1, :-2]
    down = p[:, :, 2:, 1:-1]
    up = p[:, :, :-2, 1:-1]
    gradient = mean(tabs(right - centre)) + mean(tabs(down - centre))
    laplacian = mean(tabs(right + left + down + up - centre * 4.0))
    return gradient + laplacian


def edge_targets(flows: np.ndarray, config: LafcConfig) -> np.ndarray:
    """Canny boundaries of ground-truth flows [N, 2, H, W] -> [N, 1, H, W]."""
    maps = [canny(FlowField(f.transpose(1, 2, 0)), config.canny_sigma, config.canny_low, config.canny_high)
            for f in flows]
    return np.stack(maps)[:, None].astype(np.float64)


def flow_losses(pred: Tensor, gt: np.ndarray, mask: np.ndarray, frame_src: np.ndarray,
                frame_dst: np.ndarray, occlusion: np.ndarray, edge_pred: Optional[Tensor],
                config: LafcConfig, edge_target: Optional[np.ndarray] = None) -> FlowLosses:
    """L_c, L_v, L_s, L_w, L_e and their weighted sum L_F.

    Args:
        pred: Completed flow [N, 2, H, W] (raw network output)
        gt: Ground-truth flow [N, 2, H, W]
        mask: Hole mask [N, H, W]
        frame_src: Frames the flow is defined on [N, 3, H, W]
        frame_dst: Frames the flow points into [N, 3, H, W]
        occlusion: [N, H, W] 1 = excluded from the warp loss
        edge_pred: Edge probabilities [N, 1, H, W] or None
        edge_target: Precomputed binary boundaries; Canny of ``gt`` when omitted
    """
    flags: Set[str] = set()
    m = np.asarray(mask, dtype=pred.dtype)[:, None]
    terms: Dict[str, Tensor] = {
        "L_c": masked_l1(pred, gt, m, flags),
        "L_v": masked_l1(pred, gt, 1.0 - m, flags),
        "L_s": smoothness_loss(pred),
    }
    warped = grid_sample_bilinear(as_tensor(frame_dst, like=pred), permute(pred, (0, 2, 3, 1)))
    visible = (1.0 - np.asarray(occlusion, dtype=pred.dtype))[:, None]
    terms["L_w"] = masked_l1(warped, frame_src, visible, flags)
    if edge_pred is not None and config.use_edge_head:
        target = edge_target if edge_target is not None else edge_targets(np.asarray(gt), config)
        terms["L_e"] = bce(target, edge_pred)
    else:
        terms["L_e"] = Tensor(np.zeros((), dtype=pred.dtype))
    weights = config.weights
    total = None
    for name, term in terms.items():
        weighted = term * weights[name]
        total = weighted if total is None else total + weighted
    return FlowLosses(terms, total, flags)

"""
Flow-guided transformer for frame inpainting.

Frames premultiplied by (1 - M) and concatenated with M are encoded by a
strided conv stack (x4 downsampling), propagated along completed flows on the
local frames, then split into overlapping tokens. Blocks alternate temporal
(zone attention across all frames plus flow-aligned window attention on the
local frames) and spatial (window attention with condensed global tokens,
flow-token integration on the first one). Feed-forward layers compose tokens
back to features, optionally propagate them along the flows, and split again.
A conv decoder returns the local frames in [0, 1].
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .attention import DualPerspectiveAttention, LargeWindowAttention, TemporalDeformableAttention
from .errors import ConfigError, ShapeError
from .functional import lrelu, resize_bilinear
from .nn import Conv2d, LayerNorm, Linear, Module, ModuleList
from .propagation import FlowGuidedPropagation, feature_flows
from .tensor import DEFAULT_DTYPE, Tensor, as_tensor, concat, reshape, sigmoid
from .tokens import PositionalEmbedding, SoftComposition, SoftSplit, TokenGeometry, soft_composition, soft_split

logger = logging.getLogger(__name__)

DOWNSAMPLE = 4


@dataclass
class FgtConfig:
    """Transformer layout and ablation switches.

    Attributes:
        channels: Token channels C
        heads: Attention heads (C must divide evenly)
        num_blocks: Blocks, alternating temporal/spatial starting with temporal
        zones: Zone division per side for large-window attention
        window: Spatial window side for dual-perspective attention
        global_stride: Kernel and stride of the global-token depthwise conv (s_g)
        local_radius: s_l, the window holds 2 * s_l + 1 local frames
        global_interval: r, spacing of sampled global frames
        num_global: Global frames per training sample
        use_fgfi / use_fgfp / use_td: Component switches for the ablation variants
        fgfp_blocks: Leading blocks whose feed-forward propagates along flows
        fgfp_in_encoder: Propagate encoder features before tokenization
        fgfi_blocks: Leading spatial blocks carrying flow-token integration
    """
    channels: int = 128
    heads: int = 4
    num_blocks: int = 8
    zones: int = 2
    window: int = 8
    global_stride: int = 4
    local_radius: int = 2
    global_interval: int = 10
    num_global: int = 3
    kernel: int = 7
    stride: int = 3
    padding: int = 3
    encoder_channels: int = 64
    fold_channels: int = 8
    use_fgfi: bool = True
    use_fgfp: bool = True
    use_td: bool = True
    fgfp_blocks: int = 6
    fgfp_in_encoder: bool = True
    fgfi_blocks: int = 1

    @property
    def num_local(self) -> int:
        return 2 * self.local_radius + 1

    def block_kinds(self) -> List[str]:
        return ["temporal" if i % 2 == 0 else "spatial" for i in range(self.num_blocks)]

    def validate(self) -> None:
        """Raise ConfigError when the block layout cannot be built."""
        problems = []
        if self.num_blocks < 1:
            problems.append("num_blocks must be >= 1")
        if self.channels % self.heads:
            problems.append(f"channels {self.channels} not divisible by heads {self.heads}")
        if not 0 <= self.fgfp_blocks <= self.num_blocks:
            problems.append(f"fgfp_blocks {self.fgfp_blocks} outside [0, {self.num_blocks}]")
        spatial = self.block_kinds().count("spatial")
        if not 0 <= self.fgfi_blocks <= spatial:
            problems.append(f"fgfi_blocks {self.fgfi_blocks} outside [0, {spatial}] spatial blocks")
        for name in ("zones", "window", "global_stride", "kernel", "stride", "encoder_channels", "fold_channels"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be >= 1")
        if self.encoder_channels % 4:
            problems.append("encoder_channels must be a multiple of 4")
        if self.local_radius < 0 or self.global_interval < 1 or self.num_global < 0:
            problems.append("local_radius/global_interval/num_global out of range")
        if problems:
            raise ConfigError("; ".join(problems))


class FlowFeatureIntegration(Module):
    """Gated fusion of flow tokens into frame tokens."""

    def __init__(self, channels: int, rng: np.random.Generator, dtype=DEFAULT_DTYPE):
        super().__init__()
        self.gate_hidden = Linear(2 * channels, channels, rng, dtype=dtype)
        self.gate_out = Linear(channels, channels, rng, dtype=dtype)
        self.projection = Linear(2 * channels, channels, rng, dtype=dtype)

    def gated_flow_tokens(self, frame_tokens: Tensor, flow_tokens: Tensor) -> Tensor:
        """Flow tokens scaled by a sigmoid gate computed from both token maps."""
        if frame_tokens.shape != flow_tokens.shape:
            raise ShapeError(f"flow tokens {flow_tokens.shape} do not match frame tokens {frame_tokens.shape}")
        joint = concat([frame_tokens, flow_tokens], axis=-1)
        return flow_tokens * sigmoid(self.gate_out(lrelu(self.gate_hidden(joint))))

    def forward(self, frame_tokens: Tensor, flow_tokens: Tensor) -> Tensor:
        gated = self.gated_flow_tokens(frame_tokens, flow_tokens)
        return self.projection(concat([frame_tokens, gated], axis=-1))


class FeedForward(Module):
    """Token MLP with a composition/split round trip; propagates along flows when built with ``propagate``."""

    def __init__(self, channels: int, geometry: TokenGeometry, fold_channels: int, rng: np.random.Generator,
                 propagate: bool = False, dtype=DEFAULT_DTYPE):
        super().__init__()
        self.geometry = geometry
        self.fold_channels = fold_channels
        self.fc1 = Linear(channels, fold_channels * geometry.patch_area, rng, dtype=dtype)
        self.fc2 = Linear(fold_channels * geometry.patch_area, channels, rng, dtype=dtype)
        self.propagation = FlowGuidedPropagation(fold_channels, rng, dtype) if propagate else None

    def forward(self, x: Tensor, num_local: int, flows: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> Tensor:
        n, t, gh, gw, c = x.shape
        patches = self.fc1(reshape(x, (n * t, gh, gw, c)))
        feats = soft_composition(patches, self.geometry)
        fh, fw = feats.shape[2], feats.shape[3]
        if self.propagation is not None and flows is not None:
            feats = reshape(feats, (n, t, self.fold_channels, fh, fw))
            local = self.propagation(feats[:, :num_local], *flows)
            feats = concat([local, feats[:, num_local:]], axis=1) if t > num_local else local
            feats = reshape(feats, (n * t, self.fold_channels, fh, fw))
        tokens = lrelu(soft_split(feats, self.geometry))
        return reshape(self.fc2(tokens), x.shape)


class TemporalBlock(Module):
    """Zone attention over every frame, plus flow-aligned window attention on the local frames."""

    kind = "temporal"

    def __init__(self, config: FgtConfig, geometry: TokenGeometry, rng: np.random.Generator,
                 propagate: bool, dtype=DEFAULT_DTYPE):
        super().__init__()
        c = config.channels
        zones = (config.zones, config.zones)
        self.norm1 = LayerNorm(c, dtype=dtype)
        self.zone_attention = LargeWindowAttention(c, config.heads, rng, zones, dtype)
        self.deformable_attention = (TemporalDeformableAttention(c, config.heads, geometry, rng,
                                                                 config.fold_channels, zones, dtype)
                                     if config.use_td else None)
        self.norm2 = LayerNorm(c, dtype=dtype)
        self.ffn = FeedForward(c, geometry, config.fold_channels, rng, propagate, dtype)

    def forward(self, x: Tensor, num_local: int, flows=None, flow_tokens=None) -> Tensor:
        y = self.norm1(x)
        attended = self.zone_attention(y)
        if self.deformable_attention is not None:
            prev, nxt = flows if flows is not None else (None, None)
            local = attended[:, :num_local] + self.deformable_attention(y[:, :num_local], prev, nxt)
            attended = concat([local, attended[:, num_local:]], axis=1) if x.shape[1] > num_local else local
        x = x + attended
        return x + self.ffn(self.norm2(x), num_local, flows)


class SpatialBlock(Module):
    """Per-frame window attention with global tokens; the first ones also integrate flow tokens."""

    kind = "spatial"

    def __init__(self, config: FgtConfig, geometry: TokenGeometry, rng: np.random.Generator,
                 propagate: bool, integrate: bool, dtype=DEFAULT_DTYPE):
        super().__init__()
        c = config.channels
        self.norm1 = LayerNorm(c, dtype=dtype)
        self.integration = FlowFeatureIntegration(c, rng, dtype) if integrate else None
        self.window_attention = DualPerspectiveAttention(c, config.heads, rng, config.window,
                                                         config.global_stride, dtype)
        self.norm2 = LayerNorm(c, dtype=dtype)
        self.ffn = FeedForward(c, geometry, config.fold_channels, rng, propagate, dtype)

    def forward(self, x: Tensor, num_local: int, flows=None, flow_tokens=None) -> Tensor:
        y = self.norm1(x)
        if self.integration is not None and flow_tokens is not None:
            local = self.integration(y[:, :num_local], flow_tokens)
            y = concat([local, y[:, num_local:]], axis=1) if x.shape[1] > num_local else local
        x = x + self.window_attention(y)
        return x + self.ffn(self.norm2(x), num_local, flows)


def _walk(module: Module):
    yield module
    for _, child in module.named_children():
        yield from _walk(child)


class FgtNet(Module):
    """Encoder, transformer blocks and decoder for local-frame inpainting."""

    def __init__(self, config: Optional[FgtConfig] = None, rng: Optional[np.random.Generator] = None,
                 frame_size: Tuple[int, int] = (64, 112), dtype=DEFAULT_DTYPE):
        super().__init__()
        self.config = config or FgtConfig()
        self.config.validate()
        rng = rng if rng is not None else np.random.default_rng(0)
        cfg = self.config
        ce = cfg.encoder_channels
        self.geometry = self._geometry(*frame_size)

        self.enc1 = Conv2d(4, ce // 2, 3, rng, stride=2, padding=1, dtype=dtype)
        self.enc2 = Conv2d(ce // 2, ce, 3, rng, stride=2, padding=1, dtype=dtype)
        self.enc3 = Conv2d(ce, ce, 3, rng, padding=1, dtype=dtype)
        self.encoder_propagation = (FlowGuidedPropagation(ce, rng, dtype)
                                    if cfg.use_fgfp and cfg.fgfp_in_encoder else None)
        self.split = SoftSplit(ce, cfg.channels, self.geometry, rng, dtype)
        self.flow_split = SoftSplit(4, cfg.channels, self.geometry, rng, dtype) if cfg.use_fgfi else None

        blocks = []
        spatial_seen = 0
        for index, kind in enumerate(cfg.block_kinds()):
            propagate = cfg.use_fgfp and index < cfg.fgfp_blocks
            if kind == "temporal":
                blocks.append(TemporalBlock(cfg, self.geometry, rng, propagate, dtype))
            else:
                integrate = cfg.use_fgfi and spatial_seen < cfg.fgfi_blocks
                blocks.append(SpatialBlock(cfg, self.geometry, rng, propagate, integrate, dtype))
                spatial_seen += 1
        self.blocks = ModuleList(blocks)
        self.position = PositionalEmbedding(cfg.channels, rng, dtype)
        self.compose = SoftComposition(cfg.channels, ce, self.geometry, rng, dtype)

        self.dec1 = Conv2d(ce, ce // 2, 3, rng, padding=1, dtype=dtype)
        self.dec2 = Conv2d(ce // 2, ce // 4, 3, rng, padding=1, dtype=dtype)
        self.head = Conv2d(ce // 4, 3, 3, rng, padding=1, dtype=dtype)
        logger.info(f"[FGT] built {cfg.num_blocks} blocks, {self.num_parameters()} parameters")

    def _geometry(self, height: int, width: int) -> TokenGeometry:
        if height % DOWNSAMPLE or width % DOWNSAMPLE:
            raise ShapeError(f"frame extent {(height, width)} must be divisible by {DOWNSAMPLE}")
        cfg = self.config
        return TokenGeometry(height // DOWNSAMPLE, width // DOWNSAMPLE, cfg.kernel, cfg.stride, cfg.padding)

    def bind_frame_size(self, height: int, width: int) -> None:
        """Retarget every token geometry to a new frame extent (weights are extent-agnostic)."""
        geometry = self._geometry(height, width)
        if geometry == self.geometry:
            return
        for module in _walk(self):
            if "geometry" in vars(module):
                module.geometry = geometry

    def encode(self, frames: Tensor, masks: np.ndarray) -> Tensor:
        """[N, T, 3, H, W] frames and [N, T, H, W] masks -> [N, T, C_e, H/4, W/4]."""
        n, t, _, h, w = frames.shape
        m = Tensor(np.asarray(masks, dtype=frames.dtype).reshape(n * t, 1, h, w))
        x = reshape(frames, (n * t, 3, h, w)) * (1.0 - m)
        x = lrelu(self.enc1(concat([x, m], axis=1)))
        x = lrelu(self.enc2(x))
        x = lrelu(self.enc3(x))
        return reshape(x, (n, t) + x.shape[1:])

    def decode(self, features: Tensor) -> Tensor:
        n, t, c, fh, fw = features.shape
        x = reshape(features, (n * t, c, fh, fw))
        x = lrelu(self.dec1(resize_bilinear(x, (2 * fh, 2 * fw))))
        x = lrelu(self.dec2(resize_bilinear(x, (4 * fh, 4 * fw))))
        out = sigmoid(self.head(x))
        return reshape(out, (n, t) + out.shape[1:])

    def forward(self, local_frames, local_masks, flows_prev=None, flows_next=None,
                global_frames=None, global_masks=None) -> Tensor:
        """Inpaint the local frames.

        Args:
            local_frames: [N, T_l, 3, H, W] in [0, 1]
            local_masks: [N, T_l, H, W], 1 marks missing pixels
            flows_prev: [N, T_l, H, W, 2] completed flows t -> t-1 (entry 0 unused)
            flows_next: [N, T_l, H, W, 2] completed flows t -> t+1 (entry T_l-1 unused)
            global_frames / global_masks: Optional distant frames and their masks

        Returns:
            Tensor [N, T_l, 3, H, W] in [0, 1]
        """
        local_frames = as_tensor(local_frames)
        n, num_local, ch, h, w = local_frames.shape
        if ch != 3:
            raise ShapeError(f"expected RGB frames, got {local_frames.shape}")
        if np.shape(local_masks) != (n, num_local, h, w):
            raise ShapeError(f"masks {np.shape(local_masks)} do not match frames {local_frames.shape}")
        self.bind_frame_size(h, w)
        geometry = self.geometry

        frames, masks = local_frames, np.asarray(local_masks)
        if global_frames is not None:
            global_frames = as_tensor(global_frames, like=local_frames)
            if global_frames.shape[0] != n or global_frames.shape[2:] != (3, h, w):
                raise ShapeError(f"global frames {global_frames.shape} do not match local {local_frames.shape}")
            g = global_frames.shape[1]
            if global_masks is None or np.shape(global_masks) != (n, g, h, w):
                shape = None if global_masks is None else np.shape(global_masks)
                raise ShapeError(f"global masks {shape} do not match global frames {global_frames.shape}")
            frames = concat([local_frames, global_frames], axis=1)
            masks = np.concatenate([masks, np.asarray(global_masks)], axis=1)

        flows = None
        if flows_prev is not None and flows_next is not None:
            flows = feature_flows(flows_prev, flows_next, (geometry.height, geometry.width))

        features = self.encode(frames, masks)
        if self.encoder_propagation is not None and flows is not None:
            local = self.encoder_propagation(features[:, :num_local], *flows)
            features = concat([local, features[:, num_local:]], axis=1) if frames.shape[1] > num_local else local

        tokens = self.split(features)
        flow_tokens = None
        if self.flow_split is not None and flows is not None:
            flow_maps = np.concatenate([flows[0], flows[1]], axis=-1).transpose(0, 1, 4, 2, 3)
            flow_tokens = self.flow_split(Tensor(np.ascontiguousarray(flow_maps, dtype=local_frames.dtype)))

        for index, block in enumerate(self.blocks):
            tokens = block(tokens, num_local, flows, flow_tokens)
            if index == 0:
                tokens = self.position(tokens)

        decoded = self.compose(tokens[:, :num_local]) + features[:, :num_local]
        return self.decode(decoded)

    def describe(self) -> Dict[str, Any]:
        """Structural summary: block kinds and which components each block carries."""
        zh = -(-self.geometry.grid[0] // self.config.zones)
        zw = -(-self.geometry.grid[1] // self.config.zones)
        blocks = []
        for index, block in enumerate(self.blocks):
            entry = {
                "index": index,
                "kind": block.kind,
                "fgfp": block.ffn.propagation is not None,
                "fgfi": getattr(block, "integration", None) is not None,
                "td": getattr(block, "deformable_attention", None) is not None,
                "parameters": block.num_parameters(),
            }
            if block.kind == "temporal":
                entry["zones"] = (self.config.zones, self.config.zones)
                if block.deformable_attention is not None:
                    entry["td_window"] = block.deformable_attention.window_size(*self.geometry.grid)
            else:
                entry["window"] = block.window_attention.window
                entry["global_stride"] = block.window_attention.global_stride
            blocks.append(entry)
        return {
            "config": asdict(self.config),
            "token_grid": self.geometry.grid,
            "zone_size": (zh, zw),
            "encoder_fgfp": self.encoder_propagation is not None,
            "blocks": blocks,
            "parameters": self.num_parameters(),
        }


def composite(prediction: np.ndarray, frames: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """M * prediction + (1 - M) * frames for [..., 3, H, W] stacks and [..., H, W] masks."""
    m = np.asarray(masks, dtype=np.float64)[..., None, :, :]
    return m * np.asarray(prediction, dtype=np.float64) + (1.0 - m) * np.asarray(frames, dtype=np.float64)

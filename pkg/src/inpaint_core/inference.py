"""
Sliding-window inference: flow completion followed by frame synthesis.

Each frame is inpainted exactly once, as the target of its own window; the
window's other local frames only provide context. Pixels outside the hole
are always copied from the input.
"""
from __future__ import annotations

import dataclasses
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .datasets import ClipData
from .errors import NonFiniteError, ShapeError
from .flow_io import FlowField, frame_name, save_image, write_flo_file
from .flow_ops import laplacian_fill, laplacian_fill_frame
from .lafc import LafcNet, prepare_inputs
from .sampling import sliding_window_sampler, target_position, window_targets
from .tensor import no_grad
from .training import flow_sequence, frame_sample
from .transformer import FgtNet, composite

logger = logging.getLogger(__name__)

STRIP_GAP = 2


def complete_flows(model: LafcNet, clip: ClipData) -> Tuple[np.ndarray, np.ndarray]:
    """LAFC-completed (forward, backward) flows of a clip, hole regions only replaced."""
    radius, interval = model.config.local_radius, model.config.interval
    completed = []
    for backward in (False, True):
        source = clip.backward if backward else clip.forward
        out = np.empty_like(source)
        with no_grad():
            for t in range(source.shape[0]):
                flows, masks = flow_sequence(clip, t, backward, radius, interval)
                filled, stacked = prepare_inputs(flows, masks)
                out[t] = model(filled, stacked).composited.data[0].transpose(1, 2, 0)
        completed.append(out)
    logger.info(f"[INFER] Completed {2 * clip.forward.shape[0]} flows of {clip.name}")
    return completed[0], completed[1]


def inpaint_clip(model: FgtNet, clip: ClipData, radius: Optional[int] = None,
                 interval: Optional[int] = None) -> np.ndarray:
    """Inpaint every frame of ``clip`` with the flows the clip carries.

    Returns:
        [T, H, W, 3] frames in [0, 1], equal to the input wherever the mask is 0

    Raises:
        ShapeError: masks and frames disagree in extent
        NonFiniteError: the network produced NaN or Inf
    """
    if clip.masks.shape != clip.frames.shape[:3]:
        raise ShapeError(f"{clip.name}: masks {clip.masks.shape} do not match frames {clip.frames.shape}")
    radius = model.config.local_radius if radius is None else radius
    interval = model.config.global_interval if interval is None else interval
    output = clip.frames.astype(np.float64).copy()
    with no_grad():
        for t in window_targets(clip.length):
            local, global_ = sliding_window_sampler(clip.length, t, radius, interval)
            sample = frame_sample(clip, local, global_)
            pred = model(sample.local_frames, sample.local_masks, sample.flows_prev, sample.flows_next,
                         sample.global_frames, sample.global_masks).data
            k = target_position(local, t)
            if not np.isfinite(pred[0, k]).all():
                raise NonFiniteError(f"{clip.name}: non-finite prediction for frame {t}", op="fgt_forward")
            merged = composite(pred[0, k], sample.local_frames[0, k], sample.local_masks[0, k])
            output[t] = np.clip(merged.transpose(1, 2, 0), 0.0, 1.0)
    return output


def laplacian_baseline(clip: ClipData) -> np.ndarray:
    """Frames with holes filled per channel by the discrete Laplace equation."""
    return np.stack([laplacian_fill_frame(frame, mask) for frame, mask in zip(clip.frames, clip.masks)])


def laplacian_baseline_flows(clip: ClipData) -> Tuple[np.ndarray, np.ndarray]:
    """Forward and backward flows with their corrupted region filled by the Laplace equation.

    A forward flow t -> t+1 is corrupted where frame t is masked, a backward flow where frame t+1 is.
    """
    forward = np.stack([laplacian_fill(FlowField(uv), clip.masks[t]).uv for t, uv in enumerate(clip.forward)])
    backward = np.stack([laplacian_fill(FlowField(uv), clip.masks[t + 1]).uv for t, uv in enumerate(clip.backward)])
    return forward, backward


def comparison_strip(masked: np.ndarray, output: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Masked input | output | reference side by side with white gaps."""
    h = masked.shape[0]
    gap = np.ones((h, STRIP_GAP, 3))
    return np.concatenate([masked, gap, output, gap, reference], axis=1)


def write_inpainted(out_dir: Path, clip: ClipData, output: np.ndarray,
                    flows: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> Dict[str, List[Path]]:
    """Write frames, comparison strips and (optionally) completed flows of one clip."""
    out_dir = Path(out_dir)
    written: Dict[str, List[Path]] = {"frames": [], "compare": [], "flows": []}
    masked = clip.frames * (1.0 - clip.masks[..., None])
    for t in range(clip.length):
        written["frames"].append(save_image(out_dir / "frames" / frame_name(t), output[t]))
        strip = comparison_strip(masked[t], output[t], clip.frames[t])
        written["compare"].append(save_image(out_dir / "compare" / frame_name(t), strip))
    if flows is not None:
        for tag, stack in zip(("fwd", "bwd"), flows):
            for t, uv in enumerate(stack):
                written["flows"].append(write_flo_file(out_dir / "flows" / f"{tag}_{t:05d}.flo",
                                                       FlowField(uv.astype(np.float32))))
    return written


def run_clip(clip: ClipData, fgt: FgtNet, lafc: Optional[LafcNet], out_dir: Path,
             baseline_dir: Optional[Path] = None) -> Dict[str, Any]:
    """Complete flows (LAFC when given, else the clip's own), inpaint and write one clip."""
    if baseline_dir is not None:
        write_inpainted(baseline_dir, clip, laplacian_baseline(clip), laplacian_baseline_flows(clip))
    flows = None
    if lafc is not None:
        flows = complete_flows(lafc, clip)
        clip = dataclasses.replace(clip, forward=flows[0], backward=flows[1])
    output = inpaint_clip(fgt, clip)
    written = write_inpainted(out_dir, clip, output, flows)
    logger.info(f"[INFER] {clip.name}: {clip.length} frames -> {out_dir}")
    return {"clip": clip.name, "frames": clip.length, "flow_source": "lafc" if lafc is not None else "clip",
            "out_dir": str(out_dir), "written": sum(len(v) for v in written.values())}

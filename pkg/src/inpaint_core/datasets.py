"""
On-disk synthetic dataset: generation, manifest and clip loading.

Layout under the data directory::

    manifest.json
    train/clip_0000/frames/00000.png ...
                   /masks/00000.png ...
                   /flows/fwd_00000.flo  (t -> t+1)  bwd_00000.flo  (t+1 -> t)
                   /occlusion/fwd_00000.png  bwd_00000.png
    heldout/clip_0000/...

The manifest lists every file with its SHA-256 so regenerations can be compared.
"""
from __future__ import annotations

import hashlib
import json
import logging
import shutil
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from .errors import DatasetError, PathCollisionError, ShapeError
from .flow_io import (frame_name, load_frame_dir, load_mask, load_mask_dir, read_flo_file, save_image,
                      save_mask, write_flo_file, FlowField)
from .functional import warp_array
from .masks import mixed_masks
from .synthetic import gen_synthetic_scene, random_scene

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
SPLITS = ("train", "heldout")
SPOT_CHECKS = 3
WARP_TOLERANCE = 1e-3


@dataclass
class ClipData:
    """One clip loaded into memory.

    Attributes:
        frames: [T, H, W, 3] in [0, 1]
        masks: [T, H, W] {0, 1}
        forward: [T-1, H, W, 2] flows t -> t+1
        backward: [T-1, H, W, 2] flows t+1 -> t
        occ_forward / occ_backward: [T-1, H, W] {0, 1}
    """
    name: str
    frames: np.ndarray
    masks: np.ndarray
    forward: np.ndarray
    backward: np.ndarray
    occ_forward: np.ndarray
    occ_backward: np.ndarray

    @property
    def length(self) -> int:
        return self.frames.shape[0]

    def flows_prev(self, indices: List[int]) -> np.ndarray:
        """Flows t -> t-1 for consecutive ``indices`` (zeros for the first entry)."""
        out = np.zeros((len(indices),) + self.forward.shape[1:])
        for k, t in enumerate(indices[1:], start=1):
            out[k] = self.backward[t - 1]
        return out

    def flows_next(self, indices: List[int]) -> np.ndarray:
        """Flows t -> t+1 for consecutive ``indices`` (zeros for the last entry)."""
        out = np.zeros((len(indices),) + self.forward.shape[1:])
        for k, t in enumerate(indices[:-1]):
            out[k] = self.forward[t]
        return out


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _clip_rng(seed: int, split: str, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, SPLITS.index(split), index])


def write_clip(clip_dir: Path, sample, masks: np.ndarray) -> Dict[str, List[Path]]:
    """Write one rendered scene and its masks; returns the written paths by kind."""
    written: Dict[str, List[Path]] = {"frames": [], "masks": [], "flows": [], "occlusion": []}
    for t, frame in enumerate(sample.frames):
        written["frames"].append(save_image(clip_dir / "frames" / frame_name(t), frame))
        written["masks"].append(save_mask(clip_dir / "masks" / frame_name(t), masks[t]))
    for t in range(sample.forward.shape[0]):
        for tag, flows, occ in (("fwd", sample.forward, sample.occ_forward),
                                ("bwd", sample.backward, sample.occ_backward)):
            written["flows"].append(write_flo_file(clip_dir / "flows" / f"{tag}_{t:05d}.flo",
                                                   FlowField(flows[t].astype(np.float32))))
            written["occlusion"].append(save_mask(clip_dir / "occlusion" / f"{tag}_{t:05d}.png", occ[t]))
    return written


def generate_dataset(config, force: bool = False) -> Dict[str, Any]:
    """Render train and held-out clips into ``config.data_dir`` and write the manifest.

    Args:
        config: RunConfig
        force: Replace an existing dataset directory

    Raises:
        PathCollisionError: The directory exists and ``force`` is not set
    """
    root = Path(config.data_dir)
    if root.exists() and any(root.iterdir()):
        if not force:
            raise PathCollisionError(f"dataset directory already exists: {root} (use --force)")
        logger.info(f"[DATA] Replacing existing dataset: {root}")
        shutil.rmtree(root)
    root.mkdir(parents=True, exist_ok=True)

    spec = config.data
    entries = []
    for split, count in (("train", spec.clips), ("heldout", spec.heldout)):
        for index in range(count):
            rng = _clip_rng(config.seed, split, index)
            scene = random_scene(spec.height, spec.width, spec.frames, num_sprites=spec.num_sprites,
                                 max_speed=spec.max_speed, integer_velocity=spec.integer_velocity, rng=rng)
            sample = gen_synthetic_scene(scene)
            kind, masks = mixed_masks(spec.mask_kinds, spec.frames, spec.height, spec.width, rng,
                                      max_step=spec.mask_max_step)
            name = f"clip_{index:04d}"
            written = write_clip(root / split / name, sample, masks)
            entries.append({
                "name": name,
                "split": split,
                "length": spec.frames,
                "mask_kind": kind,
                "files": {kind_: [{"path": p.relative_to(root).as_posix(), "sha256": sha256_file(p)}
                                  for p in paths] for kind_, paths in written.items()},
            })
        logger.info(f"[DATA] Wrote {count} {split} clips")

    manifest = {"version": 1, "seed": config.seed, "config": config.fingerprint(),
                "height": spec.height, "width": spec.width, "clips": entries}
    (root / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    load_clip.cache_clear()
    return manifest


def read_manifest(root: Union[str, Path]) -> Dict[str, Any]:
    path = Path(root) / MANIFEST
    if not path.exists():
        raise DatasetError(f"dataset manifest not found: {path} (run gen-data first)")
    return json.loads(path.read_text(encoding="utf-8"))


def clip_dirs(root: Union[str, Path], split: str) -> List[Path]:
    base = Path(root) / split
    if not base.is_dir():
        raise DatasetError(f"dataset split not found: {base}")
    dirs = sorted(p for p in base.iterdir() if p.is_dir())
    if not dirs:
        raise DatasetError(f"dataset split is empty: {base}")
    return dirs


def _flow_stack(flow_dir: Path, tag: str, count: int) -> np.ndarray:
    return np.stack([read_flo_file(Path(flow_dir) / f"{tag}_{t:05d}.flo").uv.astype(np.float64)
                     for t in range(count)])


def _occlusion_stack(clip_dir: Path, tag: str, count: int, shape) -> np.ndarray:
    paths = [clip_dir / "occlusion" / f"{tag}_{t:05d}.png" for t in range(count)]
    if not all(p.exists() for p in paths):
        return np.zeros((count,) + shape, dtype=np.uint8)
    return np.stack([load_mask(p) for p in paths])


@lru_cache(maxsize=16)
def load_clip(clip_dir: Union[str, Path]) -> ClipData:
    """Load frames, masks, flows and occlusion labels of one clip directory.

    Raises:
        DatasetError: missing directories or files
        ShapeError: frames, masks and flows disagree in extent or count
    """
    clip_dir = Path(clip_dir)
    frames = load_frame_dir(clip_dir / "frames")
    masks = load_mask_dir(clip_dir / "masks")
    if masks.shape != frames.shape[:3]:
        raise ShapeError(f"{clip_dir.name}: masks {masks.shape} do not match frames {frames.shape}")
    count = frames.shape[0] - 1
    forward = _flow_stack(clip_dir / "flows", "fwd", count)
    backward = _flow_stack(clip_dir / "flows", "bwd", count)
    if forward.shape[1:3] != frames.shape[1:3]:
        raise ShapeError(f"{clip_dir.name}: flows {forward.shape} do not match frames {frames.shape}")
    shape = frames.shape[1:3]
    return ClipData(clip_dir.name, frames, masks, forward, backward,
                    _occlusion_stack(clip_dir, "fwd", count, shape),
                    _occlusion_stack(clip_dir, "bwd", count, shape))


def warp_error(clip: ClipData, t: int) -> float:
    """Mean |frame_t - warp(frame_{t+1}, F_{t->t+1})| over visible pixels."""
    warped = warp_array(clip.frames[t + 1], clip.forward[t])
    visible = clip.occ_forward[t] == 0
    if not visible.any():
        return 0.0
    return float(np.abs(warped - clip.frames[t])[visible].mean())


def spot_check(root: Union[str, Path], seed: int = 0, clips: int = SPOT_CHECKS,
               tolerance: float = WARP_TOLERANCE) -> Dict[str, float]:
    """Warp-consistency check on a few seeded random training clips.

    Raises:
        DatasetError: a checked clip exceeds ``tolerance``
    """
    dirs = clip_dirs(root, "train")
    rng = np.random.default_rng([seed, 99])
    picked = rng.choice(len(dirs), size=min(clips, len(dirs)), replace=False)
    results = {}
    for i in sorted(int(p) for p in picked):
        clip = load_clip(dirs[i])
        t = int(rng.integers(0, clip.length - 1))
        error = warp_error(clip, t)
        results[clip.name] = error
        if error >= tolerance:
            raise DatasetError(f"warp spot check failed for {clip.name} (t={t}): error {error:.2e}")
    logger.info(f"[DATA] Warp spot check passed on {len(results)} clips")
    return results


def verify_manifest(root: Union[str, Path]) -> List[str]:
    """Paths whose checksum no longer matches the manifest (empty when intact)."""
    root = Path(root)
    manifest = read_manifest(root)
    mismatched = []
    for entry in manifest["clips"]:
        for files in entry["files"].values():
            for item in files:
                path = root / item["path"]
                if not path.exists() or sha256_file(path) != item["sha256"]:
                    mismatched.append(item["path"])
    return mismatched


def load_external_clip(frames_dir: Union[str, Path], masks_dir: Union[str, Path],
                       flows_dir: Optional[Union[str, Path]] = None) -> ClipData:
    """Clip from user directories; flows default to zero when no flow directory is given."""
    frames = load_frame_dir(frames_dir)
    masks = load_mask_dir(masks_dir)
    if masks.shape != frames.shape[:3]:
        raise ShapeError(f"masks {masks.shape} do not match frames {frames.shape}")
    count = frames.shape[0] - 1
    shape = frames.shape[1:3]
    if flows_dir is not None:
        forward = _flow_stack(flows_dir, "fwd", count)
        backward = _flow_stack(flows_dir, "bwd", count)
    else:
        forward = np.zeros((count,) + shape + (2,))
        backward = np.zeros_like(forward)
    zeros = np.zeros((count,) + shape, dtype=np.uint8)
    return ClipData(Path(frames_dir).name, frames, masks, forward, backward, zeros, zeros.copy())

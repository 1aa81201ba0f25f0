"""
Training loops for the flow-completion network and the transformer.

Every iteration draws its sample from a generator seeded with
(seed, network id, iteration), so a run resumed from a checkpoint replays
exactly the samples the uninterrupted run would have seen. Checkpoints hold
model weights, buffers, optimizer moments and the last finished iteration.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .csv_utils import CurveWriter
from .datasets import ClipData, clip_dirs, load_clip
from .errors import CheckpointError, NonFiniteError
from .flow_io import FlowField
from .lafc import LafcNet, flow_losses, prepare_inputs
from .nn import Module
from .objectives import Discriminator, amplitude_loss, gan_losses, generator_total, recon_losses
from .optim import Adam, MultiStepSchedule
from .sampling import clip_choice, lafc_flow_indices, training_indices
from .tensor import Tensor
from .transformer import FgtNet

logger = logging.getLogger(__name__)

LAFC_STREAM = 1
FGT_STREAM = 2
LAFC_CHECKPOINT = "lafc.ckpt"
FGT_CHECKPOINT = "fgt.ckpt"
NAN_DUMP = "nan_dump.ckpt"


def iteration_rng(seed: int, stream: int, iteration: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream, iteration])


def build_lafc(config) -> LafcNet:
    return LafcNet(config.lafc, np.random.default_rng([config.seed, LAFC_STREAM, 0]))


def build_fgt(config) -> FgtNet:
    spec = config.data
    return FgtNet(config.fgt, np.random.default_rng([config.seed, FGT_STREAM, 0]),
                  frame_size=(spec.height, spec.width))


def build_discriminator(config) -> Discriminator:
    return Discriminator(np.random.default_rng([config.seed, FGT_STREAM, 1]),
                         base_channels=config.schedule.disc_channels)


# ------------------------------------------------------------------ samples
@dataclass
class FlowSample:
    """Batch for the flow-completion network (arrays carry a leading N)."""
    flows: np.ndarray        # [N, 2n+1, H, W, 2] Laplacian-filled
    masks: np.ndarray        # [N, 2n+1, H, W]
    target: np.ndarray       # [N, 2, H, W] ground truth of the middle flow
    hole: np.ndarray         # [N, H, W]
    frame_src: np.ndarray    # [N, 3, H, W]
    frame_dst: np.ndarray    # [N, 3, H, W]
    occlusion: np.ndarray    # [N, H, W]


def flow_sequence(clip: ClipData, t: int, backward: bool, radius: int, interval: int):
    """Masked input sequence around flow t of one direction: (flows, masks, target index list)."""
    flows = clip.backward if backward else clip.forward
    indices = lafc_flow_indices(flows.shape[0], t, radius, interval)
    # a forward flow lives on frame i, a backward flow on frame i + 1
    offset = 1 if backward else 0
    masks = [clip.masks[i + offset] for i in indices]
    return [FlowField(flows[i]) for i in indices], masks


def lafc_sample(dirs: List[Path], config, iteration: int) -> FlowSample:
    rng = iteration_rng(config.seed, LAFC_STREAM, iteration)
    parts = []
    for _ in range(config.schedule.batch_size):
        clip = load_clip(dirs[clip_choice(rng, len(dirs))])
        backward = bool(rng.integers(0, 2))
        t = int(rng.integers(0, clip.length - 1))
        flows, masks = flow_sequence(clip, t, backward, config.lafc.local_radius, config.lafc.interval)
        filled, stacked = prepare_inputs(flows, masks)
        gt = (clip.backward if backward else clip.forward)[t]
        src, dst = (t + 1, t) if backward else (t, t + 1)
        occ = (clip.occ_backward if backward else clip.occ_forward)[t]
        parts.append(FlowSample(filled, stacked, gt.transpose(2, 0, 1)[None], clip.masks[src][None],
                                clip.frames[src].transpose(2, 0, 1)[None], clip.frames[dst].transpose(2, 0, 1)[None],
                                occ[None]))
    return FlowSample(*(np.concatenate([getattr(p, f) for p in parts]).astype(np.float64)
                        for f in FlowSample.__dataclass_fields__))


@dataclass
class FrameSample:
    """Batch for the transformer (frames as [N, T, 3, H, W])."""
    local_frames: np.ndarray
    local_masks: np.ndarray
    global_frames: Optional[np.ndarray]
    global_masks: Optional[np.ndarray]
    flows_prev: np.ndarray
    flows_next: np.ndarray


def frame_sample(clip: ClipData, local: List[int], global_: List[int]) -> FrameSample:
    def frames(idx):
        return clip.frames[idx].transpose(0, 3, 1, 2)[None]

    return FrameSample(
        local_frames=frames(local),
        local_masks=clip.masks[local][None].astype(np.float64),
        global_frames=frames(global_) if global_ else None,
        global_masks=clip.masks[global_][None].astype(np.float64) if global_ else None,
        flows_prev=clip.flows_prev(local)[None],
        flows_next=clip.flows_next(local)[None],
    )


def fgt_sample(dirs: List[Path], config, iteration: int) -> FrameSample:
    rng = iteration_rng(config.seed, FGT_STREAM, iteration)
    clip = load_clip(dirs[clip_choice(rng, len(dirs))])
    cfg = config.fgt
    local, global_ = training_indices(clip.length, rng, cfg.local_radius, cfg.global_interval, cfg.num_global)
    return frame_sample(clip, local, global_)


# --------------------------------------------------------------- trainers
class _Trainer:
    """Shared checkpoint / resume / NaN handling."""

    name = ""
    checkpoint_name = ""
    schema = ""

    def __init__(self, config):
        self.config = config
        self.checkpoint_path = Path(config.checkpoint_dir) / self.checkpoint_name
        self.curves_path = Path(config.out_dir) / f"{self.name}_curves.csv"

    def modules(self) -> Dict[str, Module]:
        raise NotImplementedError

    def optimizers(self) -> Dict[str, Adam]:
        raise NotImplementedError

    def iterations(self) -> int:
        raise NotImplementedError

    def milestone(self) -> int:
        raise NotImplementedError

    def step(self, iteration: int) -> Dict[str, float]:
        raise NotImplementedError

    def state(self) -> Dict[str, np.ndarray]:
        tensors: Dict[str, np.ndarray] = {}
        for prefix, module in self.modules().items():
            tensors.update({f"{prefix}/{k}": v for k, v in module.state_dict().items()})
        for prefix, opt in self.optimizers().items():
            tensors.update(opt.state_arrays(prefix=f"optim_{prefix}"))
        return tensors

    def save(self, path: Path, iteration: int) -> Path:
        metadata = {"network": self.name, "iteration": iteration, "config": self.config.fingerprint(),
                    "optim_steps": {k: o.state.step for k, o in self.optimizers().items()}}
        return save_checkpoint(path, self.state(), metadata)

    def restore(self, path: Path) -> int:
        """Load a checkpoint; returns the next iteration to run."""
        tensors, metadata = load_checkpoint(path)
        if metadata.get("network") != self.name:
            raise CheckpointError(f"{path} holds a '{metadata.get('network')}' checkpoint, expected '{self.name}'")
        if metadata.get("config") != self.config.fingerprint():
            logger.warning(f"[TRAIN] {path.name} was written under a different configuration")
        for prefix, module in self.modules().items():
            lead = f"{prefix}/"
            module.load_state_dict({k[len(lead):]: v for k, v in tensors.items() if k.startswith(lead)})
        for prefix, opt in self.optimizers().items():
            opt.load_state_arrays(tensors, metadata["optim_steps"][prefix], prefix=f"optim_{prefix}")
        return int(metadata["iteration"]) + 1

    def _abort(self, iteration: int, error: Exception) -> None:
        dump = Path(self.config.checkpoint_dir) / NAN_DUMP
        self.save(dump, iteration)
        logger.error(f"[TRAIN] Non-finite value at iteration {iteration}, state dumped to: {dump}")
        raise NonFiniteError(f"{self.name}: non-finite value at iteration {iteration}: {error}",
                             op=getattr(error, "op", None), iteration=iteration,
                             parameter=getattr(error, "parameter", None)) from error

    def run(self, resume: bool = True, max_iterations: Optional[int] = None) -> Dict[str, Any]:
        """Train until the configured budget (or ``max_iterations`` total) is reached."""
        total = self.iterations() if max_iterations is None else min(self.iterations(), max_iterations)
        start = 0
        if resume and self.checkpoint_path.exists():
            start = self.restore(self.checkpoint_path)
            logger.info(f"[TRAIN] Resuming {self.name} at iteration {start}")
        schedule = MultiStepSchedule(self.config.schedule.lr, [self.milestone()])
        curves = CurveWriter(self.curves_path, self.schema, resume_iteration=start - 1)
        every = max(1, self.config.schedule.checkpoint_every)
        log_every = max(1, self.config.schedule.log_every)
        first: Optional[Dict[str, float]] = None
        last: Optional[Dict[str, float]] = None
        for iteration in range(start, total):
            lr = schedule.lr_at(iteration)
            for opt in self.optimizers().values():
                opt.lr = lr
            try:
                values = self.step(iteration)
            except NonFiniteError as e:
                self._abort(iteration, e)
            row = {"iteration": iteration, "lr": lr, **values}
            curves.append(row)
            first = first or row
            last = row
            if iteration % log_every == 0:
                logger.info(f"[TRAIN] {self.name} it {iteration} lr {lr:.2e} "
                            + " ".join(f"{k}={v:.4f}" for k, v in values.items()))
            if (iteration + 1) % every == 0 or iteration == total - 1:
                self.save(self.checkpoint_path, iteration)
        return {
            "status": "success",
            "network": self.name,
            "start": start,
            "iterations": total,
            "checkpoint": str(self.checkpoint_path),
            "curves": str(self.curves_path),
            "first": first,
            "last": last,
        }


def _finite(value: Tensor, name: str) -> float:
    out = float(value.item())
    if not np.isfinite(out):
        raise NonFiniteError(f"{name} is not finite", op=name)
    return out


class LafcTrainer(_Trainer):
    name = "lafc"
    checkpoint_name = LAFC_CHECKPOINT
    schema = "lafc_curves"

    def __init__(self, config, model: Optional[LafcNet] = None):
        super().__init__(config)
        self.model = model or build_lafc(config)
        self.optimizer = Adam(self.model.parameters(), lr=config.schedule.lr)
        self.dirs = clip_dirs(config.data_dir, "train")

    def modules(self):
        return {"model": self.model}

    def optimizers(self):
        return {"model": self.optimizer}

    def iterations(self) -> int:
        return self.config.schedule.lafc_iterations

    def milestone(self) -> int:
        return self.config.schedule.lafc_milestone

    def step(self, iteration: int) -> Dict[str, float]:
        sample = lafc_sample(self.dirs, self.config, iteration)
        out = self.model(sample.flows, sample.masks)
        losses = flow_losses(out.flow, sample.target, sample.hole, sample.frame_src, sample.frame_dst,
                             sample.occlusion, out.edge, self.config.lafc)
        _finite(losses.total, "L_F")
        self.optimizer.zero_grad()
        losses.total.backward()
        self.optimizer.step()
        return losses.values()


class FgtTrainer(_Trainer):
    name = "fgt"
    checkpoint_name = FGT_CHECKPOINT
    schema = "fgt_curves"

    def __init__(self, config, model: Optional[FgtNet] = None, discriminator: Optional[Discriminator] = None):
        super().__init__(config)
        self.model = model or build_fgt(config)
        self.discriminator = discriminator or build_discriminator(config)
        self.optimizer = Adam(self.model.parameters(), lr=config.schedule.lr)
        self.disc_optimizer = Adam(self.discriminator.parameters(), lr=config.schedule.lr)
        self.dirs = clip_dirs(config.data_dir, "train")

    def modules(self):
        return {"model": self.model, "disc": self.discriminator}

    def optimizers(self):
        return {"model": self.optimizer, "disc": self.disc_optimizer}

    def iterations(self) -> int:
        return self.config.schedule.fgt_iterations

    def milestone(self) -> int:
        return self.config.schedule.fgt_milestone

    def step(self, iteration: int) -> Dict[str, float]:
        sample = fgt_sample(self.dirs, self.config, iteration)
        pred = self.model(sample.local_frames, sample.local_masks, sample.flows_prev, sample.flows_next,
                          sample.global_frames, sample.global_masks)
        target = sample.local_frames
        l_yc, l_yv = recon_losses(pred, target, sample.local_masks)
        l_amp = amplitude_loss(pred, target)
        l_adv, l_d = gan_losses(self.discriminator, target, pred, self.config.loss.hinge_mode)
        l_y = generator_total(l_yc, l_yv, l_adv, l_amp, self.config.loss)
        values = {"L_yc": _finite(l_yc, "L_yc"), "L_yv": _finite(l_yv, "L_yv"), "L_adv": _finite(l_adv, "L_adv"),
                  "L_amp": _finite(l_amp, "L_amp"), "L_y": _finite(l_y, "L_y"), "L_D": _finite(l_d, "L_D")}

        self.disc_optimizer.zero_grad()
        l_d.backward()
        self.disc_optimizer.step()

        self.optimizer.zero_grad()
        l_y.backward()
        self.optimizer.step()
        self.disc_optimizer.zero_grad()
        return values


def load_lafc(config, path: Optional[Path] = None) -> LafcNet:
    model = build_lafc(config)
    tensors, _ = load_checkpoint(path or Path(config.checkpoint_dir) / LAFC_CHECKPOINT)
    model.load_state_dict({k[len("model/"):]: v for k, v in tensors.items() if k.startswith("model/")})
    return model.eval()


def load_fgt(config, path: Optional[Path] = None) -> FgtNet:
    model = build_fgt(config)
    tensors, _ = load_checkpoint(path or Path(config.checkpoint_dir) / FGT_CHECKPOINT)
    model.load_state_dict({k[len("model/"):]: v for k, v in tensors.items() if k.startswith("model/")})
    return model.eval()

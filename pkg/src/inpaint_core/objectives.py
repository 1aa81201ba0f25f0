"""
Transformer training objectives: masked reconstruction, Fourier amplitude
loss, hinge adversarial losses with a spectrally normalized spatiotemporal
patch discriminator, and amplitude-spectrum group statistics.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import ConfigError, EmptyRegionError, ShapeError
from .functional import dft2_amplitude, lrelu, masked_l1
from .nn import Conv3d, Module, ModuleList
from .tensor import DEFAULT_DTYPE, Tensor, as_tensor, mean, permute, tabs

logger = logging.getLogger(__name__)

HINGE_MODES = ("conventional", "verbatim")
AMPLITUDE_FLOOR = 1e-12
SPECTRUM_EDGES = (-4.0, -3.0, -2.0)


@dataclass
class LossWeights:
    """Weights of L_yc, L_yv, L_adv and L_amp in the generator objective."""
    w_yc: float = 1.0
    w_yv: float = 1.0
    w_adv: float = 0.01
    w_amp: float = 0.1
    hinge_mode: str = "conventional"

    def __post_init__(self):
        if self.hinge_mode not in HINGE_MODES:
            raise ConfigError(f"hinge_mode must be one of {HINGE_MODES}, got {self.hinge_mode!r}")


def _expand_mask(mask, pred: Tensor) -> np.ndarray:
    m = np.asarray(mask.data if isinstance(mask, Tensor) else mask, dtype=pred.dtype)
    if m.ndim == pred.ndim - 1:
        m = m[..., None, :, :]
    return m


def recon_losses(pred: Tensor, target, mask, flags=None) -> Tuple[Tensor, Tensor]:
    """(L_yc, L_yv): masked L1 over the hole and over the valid region.

    Frames are [..., 3, H, W]; masks [..., H, W] (or already channel-expanded), 1 = hole.
    """
    m = _expand_mask(mask, pred)
    return masked_l1(pred, target, m, flags), masked_l1(pred, target, 1.0 - m, flags)


def amplitude_loss(pred: Tensor, target) -> Tensor:
    """Mean absolute difference of per-channel DFT amplitude spectra (1/sqrt(HW) normalization)."""
    target = as_tensor(target, like=pred)
    if pred.shape != target.shape:
        raise ShapeError(f"amplitude_loss: pred {pred.shape} vs target {target.shape}")
    return mean(tabs(dft2_amplitude(pred) - dft2_amplitude(target).detach()))


def hinge_discriminator_loss(real_logits: Tensor, fake_logits: Tensor, mode: str = "conventional") -> Tensor:
    """Discriminator hinge loss.

    ``conventional``: mean ReLU(1 - D(real)) + mean ReLU(1 + D(fake)).
    ``verbatim``: mean ReLU(1 + D(real)) + mean ReLU(1 - D(fake)).
    """
    if mode == "conventional":
        return mean((1.0 - real_logits).relu()) + mean((1.0 + fake_logits).relu())
    if mode == "verbatim":
        return mean((1.0 + real_logits).relu()) + mean((1.0 - fake_logits).relu())
    raise ConfigError(f"unknown hinge mode {mode!r}")


def adversarial_loss(fake_logits: Tensor) -> Tensor:
    """Generator loss -E[D(fake)]."""
    return -mean(fake_logits)


class Discriminator(Module):
    """Spatiotemporal patch discriminator: six spectrally normalized 3D convs."""

    def __init__(self, rng: np.random.Generator, base_channels: int = 64, power_iterations: int = 1,
                 dtype=DEFAULT_DTYPE):
        super().__init__()
        c = base_channels
        widths = [3, c, 2 * c, 4 * c, 8 * c, 8 * c, 1]
        self.layers = ModuleList([
            Conv3d(widths[i], widths[i + 1], (3, 5, 5), rng, stride=(1, 2, 2), padding=(1, 2, 2),
                   spectral_norm=True, power_iterations=power_iterations, dtype=dtype)
            for i in range(len(widths) - 1)
        ])

    def forward(self, clip) -> Tensor:
        """[N, T, 3, H, W] clip -> patch logits [N, 1, T, H', W']."""
        x = permute(as_tensor(clip), (0, 2, 1, 3, 4))
        last = len(self.layers) - 1
        for index, layer in enumerate(self.layers):
            x = layer(x)
            if index < last:
                x = lrelu(x)
        return x

    def singular_values(self, steps: int = 50) -> Dict[str, float]:
        """Largest singular value of every normalized layer after ``steps`` more power iterations."""
        values = {}
        for index, layer in enumerate(self.layers):
            sigma = layer.power_iterate(steps)
            normalized = layer.weight.data.reshape(layer.weight.shape[0], -1) / sigma
            values[f"layers.{index}"] = float(np.linalg.svd(normalized, compute_uv=False)[0])
        return values


def gan_losses(discriminator: Discriminator, real, fake: Tensor, mode: str = "conventional") -> Tuple[Tensor, Tensor]:
    """(L_adv, L_D) for one real/fake clip pair.

    L_D sees the fake clip detached, so its backward pass only reaches the discriminator.
    """
    real_logits = discriminator(as_tensor(real, like=fake))
    fake_detached = discriminator(fake.detach())
    loss_d = hinge_discriminator_loss(real_logits, fake_detached, mode)
    loss_adv = adversarial_loss(discriminator(fake))
    return loss_adv, loss_d


def generator_total(l_yc, l_yv, l_adv, l_amp, weights: Optional[LossWeights] = None):
    """L_y = w_yc L_yc + w_yv L_yv + w_adv L_adv + w_amp L_amp (works on Tensors or floats)."""
    w = weights or LossWeights()
    return l_yc * w.w_yc + l_yv * w.w_yv + l_adv * w.w_adv + l_amp * w.w_amp


@dataclass
class SpectrumGroups:
    """Log-ratio partition of an amplitude map.

    Attributes:
        groups: [H, W] group index 1..4 per coefficient
        counts: Coefficients per group
        ratios: counts / HW
        l1: Mean absolute difference to a second map per group (only when compared)
    """
    groups: np.ndarray
    counts: Dict[int, int]
    ratios: Dict[int, float]
    l1: Optional[Dict[int, float]] = None

    def group_image(self) -> np.ndarray:
        """uint8 rendering, group 1 black to group 4 white."""
        return ((self.groups - 1) * 85).astype(np.uint8)


def spectrum_group_analysis(amplitude: np.ndarray, other: Optional[np.ndarray] = None) -> SpectrumGroups:
    """Bin coefficients by lg(A / max A): <= -4, (-4, -3], (-3, -2], > -2 -> groups 1..4.

    Raises:
        EmptyRegionError: the map is all zero
        ShapeError: ``other`` differs in shape
    """
    a = np.asarray(amplitude, dtype=np.float64)
    peak = float(a.max()) if a.size else 0.0
    if peak <= 0.0:
        raise EmptyRegionError("spectrum_group_analysis: amplitude map is all zero")
    ratio = np.log10(np.maximum(a, AMPLITUDE_FLOOR) / peak)
    groups = np.digitize(ratio, SPECTRUM_EDGES, right=True) + 1
    counts = {g: int((groups == g).sum()) for g in range(1, 5)}
    ratios = {g: counts[g] / a.size for g in counts}
    l1 = None
    if other is not None:
        b = np.asarray(other, dtype=np.float64)
        if b.shape != a.shape:
            raise ShapeError(f"spectrum_group_analysis: {a.shape} vs {b.shape}")
        diff = np.abs(a - b)
        l1 = {g: float(diff[groups == g].mean()) if counts[g] else 0.0 for g in counts}
    return SpectrumGroups(groups=groups, counts=counts, ratios=ratios, l1=l1)


def frame_amplitude(frame: np.ndarray) -> np.ndarray:
    """Channel-averaged amplitude spectrum of an [H, W, 3] or [H, W] frame."""
    f = np.asarray(frame, dtype=np.float64)
    if f.ndim == 3:
        f = f.transpose(2, 0, 1)
    return np.abs(np.fft.fft2(f, norm="ortho")).reshape((-1,) + f.shape[-2:]).mean(axis=0)

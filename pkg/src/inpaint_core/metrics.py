"""
Evaluation metrics: flow end-point error, PSNR and SSIM.
"""
from __future__ import annotations

import logging
from typing import Optional, Union

import numpy as np
from scipy.signal import convolve2d

from .errors import EmptyRegionError, ShapeError
from .flow_io import FlowField

logger = logging.getLogger(__name__)

PSNR_CAP = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _uv(flow: Union[FlowField, np.ndarray]) -> np.ndarray:
    return np.asarray(flow.uv if isinstance(flow, FlowField) else flow, dtype=np.float64)


def metric_epe(pred: Union[FlowField, np.ndarray], gt: Union[FlowField, np.ndarray],
               mask: Optional[np.ndarray] = None) -> float:
    """Mean per-pixel Euclidean flow error over the whole field or over ``mask == 1``.

    Raises:
        ShapeError: fields differ in extent
        EmptyRegionError: the mask selects no pixel
    """
    a, b = _uv(pred), _uv(gt)
    if a.shape != b.shape:
        raise ShapeError(f"metric_epe: pred {a.shape} vs gt {b.shape}")
    error = np.sqrt(((a - b) ** 2).sum(axis=-1))
    if mask is None:
        return float(error.mean())
    region = np.broadcast_to(np.asarray(mask).astype(bool), error.shape)
    if not region.any():
        raise EmptyRegionError("metric_epe: masked region is empty")
    return float(error[region].mean())


def metric_psnr(pred: np.ndarray, gt: np.ndarray, mask: Optional[np.ndarray] = None) -> float:
    """PSNR in dB with MAX = 1, capped at 99 dB for identical inputs."""
    a, b = np.asarray(pred, dtype=np.float64), np.asarray(gt, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"metric_psnr: pred {a.shape} vs gt {b.shape}")
    sq = (a - b) ** 2
    if mask is not None:
        m = np.asarray(mask).astype(bool)
        region = np.broadcast_to(m.reshape(m.shape + (1,) * (sq.ndim - m.ndim)), sq.shape)
        if not region.any():
            raise EmptyRegionError("metric_psnr: masked region is empty")
        mse = float(sq[region].mean())
    else:
        mse = float(sq.mean())
    if mse == 0.0:
        return PSNR_CAP
    return float(min(PSNR_CAP, 10.0 * np.log10(1.0 / mse)))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    coords = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(coords ** 2) / (2 * sigma ** 2))
    g /= g.sum()
    return np.outer(g, g)


def _ssim_channel(x: np.ndarray, y: np.ndarray, window: np.ndarray) -> float:
    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2

    def filt(img):
        return convolve2d(img, window[::-1, ::-1], mode="valid")

    mu_x, mu_y = filt(x), filt(y)
    sigma_x = filt(x * x) - mu_x ** 2
    sigma_y = filt(y * y) - mu_y ** 2
    sigma_xy = filt(x * y) - mu_x * mu_y
    numerator = (2 * mu_x * mu_y + c1) * (2 * sigma_xy + c2)
    denominator = (mu_x ** 2 + mu_y ** 2 + c1) * (sigma_x + sigma_y + c2)
    return float((numerator / denominator).mean())


def metric_ssim(pred: np.ndarray, gt: np.ndarray) -> float:
    """Mean SSIM (11x11 Gaussian window, sigma 1.5, K1 0.01, K2 0.03, dynamic range 1).

    Computed over fully-covered window positions and averaged over channels.
    Frames smaller than the window use a window the size of the smaller side.
    """
    a, b = np.asarray(pred, dtype=np.float64), np.asarray(gt, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"metric_ssim: pred {a.shape} vs gt {b.shape}")
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    size = min(SSIM_WINDOW, a.shape[0], a.shape[1])
    window = gaussian_window(size, SSIM_SIGMA)
    return float(np.mean([_ssim_channel(a[..., c], b[..., c], window) for c in range(a.shape[2])]))


def metric_psnr_ssim(pred: np.ndarray, gt: np.ndarray):
    """(PSNR dB, SSIM) of one frame pair."""
    return metric_psnr(pred, gt), metric_ssim(pred, gt)

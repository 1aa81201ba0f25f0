"""
Flow-field operations: Laplacian hole filling, Canny motion boundaries,
forward-backward occlusion checks, composition and resizing.
"""
from __future__ import annotations

import logging
from typing import Tuple, Union

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse.linalg import spsolve

from .errors import ShapeError
from .flow_io import FlowField
from .functional import _interp_matrix, warp_array

logger = logging.getLogger(__name__)

FB_ALPHA = 0.01
FB_BETA = 0.5
CANNY_SIGMA = 1.0
CANNY_LOW = 0.05
CANNY_HIGH = 0.1

_NEIGHBOURS = ((-1, 0), (1, 0), (0, -1), (0, 1))


def _harmonic_fill(values: np.ndarray, hole: np.ndarray) -> np.ndarray:
    """Solve the 4-neighbour discrete Laplace equation on ``hole`` for every channel.

    Valid pixels act as Dirichlet data; neighbours outside the image are dropped
    from the stencil (zero-flux border). ``values`` is [H, W, C].
    """
    h, w, c = values.shape
    ys, xs = np.nonzero(hole)
    n = len(ys)
    index = np.full((h, w), -1, dtype=np.int64)
    index[ys, xs] = np.arange(n)

    degree = np.zeros(n)
    rhs = np.zeros((n, c))
    rows, cols = [], []
    for dy, dx in _NEIGHBOURS:
        ny, nx = ys + dy, xs + dx
        inside = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
        degree += inside
        k = np.nonzero(inside)[0]
        nbr = index[ny[k], nx[k]]
        unknown = nbr >= 0
        rows.append(k[unknown])
        cols.append(nbr[unknown])
        known = k[~unknown]
        np.add.at(rhs, known, values[ny[known], nx[known]])

    rows = np.concatenate(rows + [np.arange(n)])
    cols = np.concatenate(cols + [np.arange(n)])
    data = np.concatenate([-np.ones(len(rows) - n), degree])
    system = sparse.csc_matrix((data, (rows, cols)), shape=(n, n))
    solution = np.asarray(spsolve(system, rhs)).reshape(n, c)

    out = values.astype(np.float64, copy=True)
    out[ys, xs] = solution
    return out


def laplacian_fill(flow: FlowField, mask: np.ndarray) -> FlowField:
    """Initialize hole flow by harmonic interpolation of the surrounding valid flow.

    Args:
        flow: Flow with corrupted values under the mask
        mask: [H, W], 1 marks the hole

    Returns:
        New FlowField; valid pixels are copied unchanged. An all-corrupted input
        comes back as zeros flagged ``all_corrupted``.
    """
    hole = np.asarray(mask).astype(bool)
    if hole.shape != (flow.height, flow.width):
        raise ShapeError(f"laplacian_fill: mask {hole.shape} does not match flow {flow.uv.shape}")
    if not hole.any():
        return flow.copy()
    if hole.all():
        logger.warning("[FILL] every pixel is corrupted, filling with zero flow")
        out = FlowField.zeros(flow.height, flow.width, dtype=flow.uv.dtype)
        out.flags.add("all_corrupted")
        return out
    filled = _harmonic_fill(flow.uv.astype(np.float64), hole)
    out = FlowField(filled.astype(flow.uv.dtype), flow.valid, set(flow.flags))
    out.uv[~hole] = flow.uv[~hole]
    logger.debug(f"[FILL] filled {int(hole.sum())} flow pixels")
    return out


def laplacian_fill_frame(frame: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Per-channel harmonic fill of an image [H, W] or [H, W, C] (the frame baseline)."""
    img = np.asarray(frame, dtype=np.float64)
    squeeze = img.ndim == 2
    values = img[..., None] if squeeze else img
    hole = np.asarray(mask).astype(bool)
    if not hole.any():
        return img.copy()
    if hole.all():
        logger.warning("[FILL] every pixel is corrupted, filling frame with zeros")
        return np.zeros_like(img)
    out = _harmonic_fill(values, hole)
    out[~hole] = values[~hole]
    return out[..., 0] if squeeze else out


# -------------------------------------------------------------------- canny
def _non_maximum_suppression(magnitude: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Keep pixels that beat the previous neighbour along the gradient strictly and the next one weakly."""
    h, w = magnitude.shape
    padded = np.pad(magnitude, 1)
    angle = np.rad2deg(np.arctan2(gy, gx)) % 180.0
    sector = (np.floor((angle + 22.5) / 45.0).astype(np.int64)) % 4
    steps = {0: (0, 1), 1: (1, 1), 2: (1, 0), 3: (1, -1)}
    rows, cols = np.mgrid[0:h, 0:w]
    keep = np.zeros((h, w), dtype=bool)
    for s, (dy, dx) in steps.items():
        sel = sector == s
        r, c = rows[sel] + 1, cols[sel] + 1
        before = padded[r - dy, c - dx]
        after = padded[r + dy, c + dx]
        m = magnitude[sel]
        keep[sel] = (m > 0) & (m > before) & (m >= after)
    return np.where(keep, magnitude, 0.0)


def canny(field: Union[FlowField, np.ndarray], sigma: float = CANNY_SIGMA,
          low: float = CANNY_LOW, high: float = CANNY_HIGH) -> np.ndarray:
    """Binary edge map [H, W] (uint8).

    Flow fields are reduced to their per-pixel magnitude first. Pipeline:
    Gaussian smoothing, Sobel gradients, non-maximum suppression, then
    hysteresis (weak pixels survive when 8-connected to a strong pixel).
    """
    if low >= high:
        raise ValueError(f"canny: low threshold {low} must be below high threshold {high}")
    if isinstance(field, FlowField):
        image = np.hypot(field.u.astype(np.float64), field.v.astype(np.float64))
    else:
        image = np.asarray(field, dtype=np.float64)
        if image.ndim == 3:
            image = image.mean(axis=2)
    smoothed = ndimage.gaussian_filter(image, sigma, mode="nearest") if sigma > 0 else image
    gx = ndimage.sobel(smoothed, axis=1, mode="nearest") / 8.0
    gy = ndimage.sobel(smoothed, axis=0, mode="nearest") / 8.0
    # equal-strength neighbours on either side of a step must compare equal
    magnitude = np.round(np.hypot(gx, gy), 10)
    thin = _non_maximum_suppression(magnitude, gx, gy)

    weak = thin >= low
    strong = thin >= high
    labels, count = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    if count == 0:
        return np.zeros(image.shape, dtype=np.uint8)
    anchored = np.zeros(count + 1, dtype=bool)
    anchored[np.unique(labels[strong])] = True
    anchored[0] = False
    edges = anchored[labels]
    logger.debug(f"[CANNY] {int(edges.sum())} edge pixels from {count} candidate segments")
    return edges.astype(np.uint8)


# ---------------------------------------------------------- consistency
def fb_consistency(forward: FlowField, backward: FlowField, alpha: float = FB_ALPHA,
                   beta: float = FB_BETA) -> np.ndarray:
    """Occlusion mask (1 = occluded) from the forward-backward round trip.

    A pixel is occluded when |F_f + W(F_b, F_f)|^2 > alpha (|F_f|^2 + |W(F_b, F_f)|^2) + beta.
    """
    if forward.uv.shape != backward.uv.shape:
        raise ShapeError(f"fb_consistency: forward {forward.uv.shape} vs backward {backward.uv.shape}")
    fwd = forward.uv.astype(np.float64)
    bwd_warped = warp_array(backward.uv.astype(np.float64), fwd)
    diff = fwd + bwd_warped
    lhs = (diff ** 2).sum(axis=-1)
    rhs = alpha * ((fwd ** 2).sum(axis=-1) + (bwd_warped ** 2).sum(axis=-1)) + beta
    return (lhs > rhs).astype(np.uint8)


def compose_flows(first: FlowField, second: FlowField) -> FlowField:
    """Chain a->b and b->c into a->c: F_ac(p) = F_ab(p) + F_bc(p + F_ab(p))."""
    if first.uv.shape != second.uv.shape:
        raise ShapeError(f"compose_flows: {first.uv.shape} vs {second.uv.shape}")
    ab = first.uv.astype(np.float64)
    composed = ab + warp_array(second.uv.astype(np.float64), ab)
    return FlowField(composed.astype(first.uv.dtype))


def resize_flow(flow: FlowField, size: Tuple[int, int]) -> FlowField:
    """Bilinear resize with displacements rescaled to the new pixel units."""
    ho, wo = int(size[0]), int(size[1])
    h, w = flow.height, flow.width
    if (ho, wo) == (h, w):
        return flow.copy()
    ry = _interp_matrix(h, ho, np.float64)
    rx = _interp_matrix(w, wo, np.float64)
    uv = flow.uv.astype(np.float64)
    out = np.stack([ry @ uv[..., i] @ rx.T for i in range(2)], axis=-1)
    out[..., 0] *= wo / w
    out[..., 1] *= ho / h
    return FlowField(out.astype(flow.uv.dtype))

"""
Differentiable building blocks composed on top of ``inpaint_core.tensor``.

Convolutions are expressed through ``unfold`` (im2col) and batched matmul,
warping through a bilinear gather with an exact scatter backward, and the
Fourier amplitude through ``numpy.fft`` with the unitary (1/sqrt(HW)) norm.
"""
from __future__ import annotations

import logging
from typing import Optional, Sequence, Set, Tuple, Union

import numpy as np

from .errors import ShapeError
from .tensor import (
    Tensor, ArrayLike, as_tensor, record, concat, take, pad, reshape, permute,
    matmul, softmax, mean, tsum, sqrt, log, clip, tabs, leaky_relu, sigmoid,
)

logger = logging.getLogger(__name__)

IntPair = Union[int, Tuple[int, int]]


def _pair(value: IntPair) -> Tuple[int, int]:
    if isinstance(value, (tuple, list)):
        return int(value[0]), int(value[1])
    return int(value), int(value)


def conv_output_size(size: int, kernel: int, stride: int = 1, padding: int = 0, dilation: int = 1) -> int:
    """floor((size + 2p - d(k-1) - 1) / s) + 1"""
    return (size + 2 * padding - dilation * (kernel - 1) - 1) // stride + 1


# ------------------------------------------------------------------ im2col
def _im2col(x: np.ndarray, kernel, stride, padding, dilation) -> Tuple[np.ndarray, Tuple[int, int]]:
    n, c, h, w = x.shape
    (kh, kw), (sh, sw), (ph, pw), (dh, dw) = kernel, stride, padding, dilation
    ho = conv_output_size(h, kh, sh, ph, dh)
    wo = conv_output_size(w, kw, sw, pw, dw)
    if ho < 1 or wo < 1:
        raise ShapeError(f"kernel {kernel} (dilation {dilation}) larger than padded input {(h + 2 * ph, w + 2 * pw)}")
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    cols = np.empty((n, c, kh, kw, ho, wo), dtype=x.dtype)
    for i in range(kh):
        y0 = i * dh
        for j in range(kw):
            x0 = j * dw
            cols[:, :, i, j] = xp[:, :, y0:y0 + sh * (ho - 1) + 1:sh, x0:x0 + sw * (wo - 1) + 1:sw]
    return cols.reshape(n, c * kh * kw, ho * wo), (ho, wo)


def _col2im(cols: np.ndarray, shape, kernel, stride, padding, dilation, out_hw) -> np.ndarray:
    n, c, h, w = shape
    (kh, kw), (sh, sw), (ph, pw), (dh, dw) = kernel, stride, padding, dilation
    ho, wo = out_hw
    cols = cols.reshape(n, c, kh, kw, ho, wo)
    xp = np.zeros((n, c, h + 2 * ph, w + 2 * pw), dtype=cols.dtype)
    for i in range(kh):
        y0 = i * dh
        for j in range(kw):
            x0 = j * dw
            xp[:, :, y0:y0 + sh * (ho - 1) + 1:sh, x0:x0 + sw * (wo - 1) + 1:sw] += cols[:, :, i, j]
    return xp[:, :, ph:ph + h, pw:pw + w]


def unfold(x: Tensor, kernel: IntPair, stride: IntPair = 1, padding: IntPair = 0,
           dilation: IntPair = 1) -> Tensor:
    """Extract sliding patches: [N,C,H,W] -> [N, C*kh*kw, L] (channel-major, then kernel row/col)."""
    if x.ndim != 4:
        raise ShapeError(f"unfold expects [N,C,H,W], got {x.shape}")
    geom = (_pair(kernel), _pair(stride), _pair(padding), _pair(dilation))
    cols, out_hw = _im2col(x.data, *geom)
    shape = x.shape
    return record(cols, (x,), lambda g: (_col2im(g, shape, *geom, out_hw),), "unfold")


def fold(cols: Tensor, output_size: Tuple[int, int], kernel: IntPair, stride: IntPair = 1,
         padding: IntPair = 0, dilation: IntPair = 1) -> Tensor:
    """Sum patches back onto an image: [N, C*kh*kw, L] -> [N,C,H,W] (adjoint of unfold)."""
    geom = (_pair(kernel), _pair(stride), _pair(padding), _pair(dilation))
    (kh, kw) = geom[0]
    n, ck, length = cols.shape
    if ck % (kh * kw):
        raise ShapeError(f"fold: channel dim {ck} not divisible by kernel area {kh * kw}")
    h, w = int(output_size[0]), int(output_size[1])
    ho = conv_output_size(h, kh, geom[1][0], geom[2][0], geom[3][0])
    wo = conv_output_size(w, kw, geom[1][1], geom[2][1], geom[3][1])
    if ho * wo != length:
        raise ShapeError(f"fold: {length} patches do not tile output {output_size} (expected {ho}x{wo})")
    shape = (n, ck // (kh * kw), h, w)
    out = _col2im(cols.data, shape, *geom, (ho, wo))
    return record(out, (cols,), lambda g: (_im2col(g, *geom)[0],), "fold")


# -------------------------------------------------------------- convolutions
def conv2d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None, stride: IntPair = 1,
           padding: IntPair = 0, dilation: IntPair = 1, groups: int = 1) -> Tensor:
    """2D cross-correlation on [N,C,H,W] with weight [C_out, C/groups, kh, kw].

    Raises:
        ShapeError: channels not divisible by groups, weight/input channel mismatch,
            or kernel larger than the padded input
    """
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError(f"conv2d expects 4-D input and weight, got {x.shape} and {weight.shape}")
    n, c, h, w = x.shape
    c_out, c_per_group, kh, kw = weight.shape
    if c % groups or c_out % groups:
        raise ShapeError(f"conv2d: channels in={c} out={c_out} not divisible by groups={groups}")
    if c_per_group * groups != c:
        raise ShapeError(f"conv2d: input {x.shape} has {c} channels, weight {weight.shape} expects {c_per_group * groups}")
    (sh, sw), (ph, pw), (dh, dw) = _pair(stride), _pair(padding), _pair(dilation)
    if h + 2 * ph < dh * (kh - 1) + 1 or w + 2 * pw < dw * (kw - 1) + 1:
        raise ShapeError(f"conv2d: kernel {(kh, kw)} larger than padded input {(h + 2 * ph, w + 2 * pw)}")
    ho = conv_output_size(h, kh, sh, ph, dh)
    wo = conv_output_size(w, kw, sw, pw, dw)
    cols = unfold(x, (kh, kw), (sh, sw), (ph, pw), (dh, dw))
    if groups == 1:
        out = matmul(reshape(weight, (c_out, -1)), cols)
    else:
        cols = reshape(cols, (n, groups, c_per_group * kh * kw, ho * wo))
        wg = reshape(weight, (groups, c_out // groups, c_per_group * kh * kw))
        out = matmul(wg, cols)
    out = reshape(out, (n, c_out, ho, wo))
    if bias is not None:
        out = out + reshape(bias, (1, c_out, 1, 1))
    return out


def conv1d_temporal(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None, stride_t: int = 1,
                    padding_t: int = 0, dilation_t: int = 1) -> Tensor:
    """Convolution along T of [N,C,T,H,W] with weight [C_out, C, k_t]; H and W are untouched."""
    if x.ndim != 5 or weight.ndim != 3:
        raise ShapeError(f"conv1d_temporal expects [N,C,T,H,W] and [Co,C,kt], got {x.shape} and {weight.shape}")
    n, c, t, h, w = x.shape
    c_out, _, kt = weight.shape
    if kt > t + 2 * padding_t:
        raise ShapeError(f"conv1d_temporal: kernel {kt} longer than padded length {t + 2 * padding_t}")
    flat = reshape(x, (n, c, t, h * w))
    out = conv2d(flat, reshape(weight, (c_out, weight.shape[1], kt, 1)), bias,
                 stride=(stride_t, 1), padding=(padding_t, 0), dilation=(dilation_t, 1))
    return reshape(out, (n, c_out, out.shape[2], h, w))


def conv3d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None,
           stride: Tuple[int, int, int] = (1, 1, 1), padding: Tuple[int, int, int] = (0, 0, 0)) -> Tensor:
    """Spatiotemporal convolution of [N,C,T,H,W] with weight [C_out, C, kt, kh, kw].

    Realized as a sum over temporal taps of per-frame conv2d calls.
    """
    if x.ndim != 5 or weight.ndim != 5:
        raise ShapeError(f"conv3d expects 5-D input and weight, got {x.shape} and {weight.shape}")
    n, c, t, h, w = x.shape
    c_out, _, kt, kh, kw = weight.shape
    st, sh, sw = stride
    pt, ph, pw = padding
    if kt > t + 2 * pt:
        raise ShapeError(f"conv3d: temporal kernel {kt} longer than padded length {t + 2 * pt}")
    xp = pad(x, ((0, 0), (0, 0), (pt, pt), (0, 0), (0, 0))) if pt else x
    t_out = conv_output_size(t, kt, st, pt)
    out = None
    for i in range(kt):
        frames = take(xp, [i + st * o for o in range(t_out)], axis=2)
        frames = reshape(permute(frames, (0, 2, 1, 3, 4)), (n * t_out, c, h, w))
        term = conv2d(frames, weight[:, :, i], None, stride=(sh, sw), padding=(ph, pw))
        out = term if out is None else out + term
    ho, wo = out.shape[2], out.shape[3]
    out = permute(reshape(out, (n, t_out, c_out, ho, wo)), (0, 2, 1, 3, 4))
    if bias is not None:
        out = out + reshape(bias, (1, c_out, 1, 1, 1))
    return out


def replicate_pad2d(x: Tensor, pad_h: int, pad_w: int) -> Tensor:
    """Edge (replicate) padding of the last two axes."""
    h, w = x.shape[-2], x.shape[-1]
    rows = np.clip(np.arange(-pad_h, h + pad_h), 0, h - 1)
    cols = np.clip(np.arange(-pad_w, w + pad_w), 0, w - 1)
    return take(take(x, rows, axis=x.ndim - 2), cols, axis=x.ndim - 1)


# -------------------------------------------------------------- normalization
def layer_norm(x: Tensor, gamma: Optional[ArrayLike] = None, beta: Optional[ArrayLike] = None,
               eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis (eps inside the root), then apply the affine map."""
    mu = mean(x, axis=-1, keepdims=True)
    centered = x - mu
    var = mean(centered * centered, axis=-1, keepdims=True)
    y = centered / sqrt(var + eps)
    if gamma is not None:
        y = y * gamma
    if beta is not None:
        y = y + beta
    return y


# ------------------------------------------------------------------ attention
def softmax_attention(q: Tensor, k: Tensor, v: Tensor, key_bias: Optional[np.ndarray] = None,
                      return_weights: bool = False):
    """softmax(Q K^T / sqrt(D)) V over the last two axes (leading axes batch).

    Args:
        q: [..., L_q, D]
        k: [..., L_k, D]
        v: [..., L_k, D_v]
        key_bias: Optional additive bias broadcastable to [..., L_q, L_k]; large negative
            values exclude keys (padding masks)
        return_weights: Also return the attention matrix

    Returns:
        [..., L_q, D_v] output (and the attention weights when requested)
    """
    if q.shape[-1] != k.shape[-1]:
        raise ShapeError(f"attention: query dim {q.shape} and key dim {k.shape} differ")
    if k.shape[-2] != v.shape[-2]:
        raise ShapeError(f"attention: key length {k.shape} and value length {v.shape} differ")
    scale = 1.0 / np.sqrt(q.shape[-1])
    scores = matmul(q, k.transpose(-2, -1)) * scale
    if key_bias is not None:
        scores = scores + np.asarray(key_bias, dtype=scores.dtype)
    weights = softmax(scores, axis=-1)
    out = matmul(weights, v)
    return (out, weights) if return_weights else out


# ---------------------------------------------------------------- resampling
def _bilinear_setup(h: int, w: int, flow: np.ndarray):
    gx = np.arange(w)[None, None, :] + flow[..., 0]
    gy = np.arange(h)[None, :, None] + flow[..., 1]
    cx = np.clip(gx, 0, w - 1)
    cy = np.clip(gy, 0, h - 1)
    inside_x = (gx >= 0) & (gx <= w - 1)
    inside_y = (gy >= 0) & (gy <= h - 1)
    x0 = np.floor(cx).astype(np.int64)
    y0 = np.floor(cy).astype(np.int64)
    x0 = np.minimum(x0, w - 2) if w > 1 else np.zeros_like(x0)
    y0 = np.minimum(y0, h - 2) if h > 1 else np.zeros_like(y0)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    wx = (cx - x0).astype(flow.dtype)
    wy = (cy - y0).astype(flow.dtype)
    return x0, x1, y0, y1, wx, wy, inside_x, inside_y


def _bilinear_forward(feat: np.ndarray, flow: np.ndarray):
    n, c, h, w = feat.shape
    x0, x1, y0, y1, wx, wy, inx, iny = _bilinear_setup(h, w, flow)
    base = (np.arange(n) * h * w)[:, None, None]
    idx = [(base + yy * w + xx).ravel() for yy, xx in ((y0, x0), (y0, x1), (y1, x0), (y1, x1))]
    flat = feat.transpose(1, 0, 2, 3).reshape(c, -1)
    v00, v01, v10, v11 = (flat[:, i] for i in idx)
    wxf, wyf = wx.ravel(), wy.ravel()
    out = (1.0 - wyf) * ((1.0 - wxf) * v00 + wxf * v01) + wyf * ((1.0 - wxf) * v10 + wxf * v11)
    out = out.reshape(c, n, h, w).transpose(1, 0, 2, 3)
    cache = (idx, (v00, v01, v10, v11), wxf, wyf, inx.ravel(), iny.ravel())
    return np.ascontiguousarray(out), cache


def warp_array(image: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """Backward-warp a numpy image [H,W] or [H,W,C] by flow [H,W,2] (border clamped)."""
    img = np.asarray(image, dtype=np.float64)
    squeeze = img.ndim == 2
    chw = img[None] if squeeze else img.transpose(2, 0, 1)
    out, _ = _bilinear_forward(chw[None], np.asarray(flow, dtype=np.float64)[None])
    out = out[0]
    return out[0] if squeeze else out.transpose(1, 2, 0)


def grid_sample_bilinear(feature: Tensor, flow) -> Tensor:
    """Backward warp: out(y, x) = bilinear sample of feature at (y + v, x + u).

    Out-of-range sample positions are clamped to the border. Differentiable
    with respect to the feature and, when ``flow`` is a tracked Tensor, the flow.

    Args:
        feature: [C,H,W] or [N,C,H,W]
        flow: [H,W,2] / [N,H,W,2] Tensor, array, or an object with a ``uv`` array

    Returns:
        Tensor shaped like ``feature``
    """
    if hasattr(flow, "uv"):
        flow = flow.uv
    flow_t = as_tensor(flow, like=feature)
    batched = feature.ndim == 4
    feat = feature if batched else reshape(feature, (1,) + feature.shape)
    fl = flow_t if flow_t.ndim == 4 else reshape(flow_t, (1,) + flow_t.shape)
    n, c, h, w = feat.shape
    if fl.shape != (n, h, w, 2):
        raise ShapeError(f"grid_sample: flow {flow_t.shape} does not match feature {feature.shape}")
    out, (idx, corners, wx, wy, inx, iny) = _bilinear_forward(feat.data, fl.data.astype(feat.dtype, copy=False))
    v00, v01, v10, v11 = corners
    size = n * h * w

    def backward(g):
        gt = g.transpose(1, 0, 2, 3).reshape(c, -1)
        gfeat = np.zeros((c, size), dtype=g.dtype)
        for i, wt in zip(idx, ((1 - wy) * (1 - wx), (1 - wy) * wx, wy * (1 - wx), wy * wx)):
            np.add.at(gfeat, (slice(None), i), gt * wt)
        gfeat = gfeat.reshape(c, n, h, w).transpose(1, 0, 2, 3)
        du = (gt * ((1 - wy) * (v01 - v00) + wy * (v11 - v10))).sum(axis=0) * inx
        dv = (gt * ((1 - wx) * (v10 - v00) + wx * (v11 - v01))).sum(axis=0) * iny
        gflow = np.stack([du.reshape(n, h, w), dv.reshape(n, h, w)], axis=-1)
        return np.ascontiguousarray(gfeat), gflow

    result = record(out, (feat, fl), backward, "grid_sample")
    return result if batched else reshape(result, feature.shape)


def _interp_matrix(src: int, dst: int, dtype) -> np.ndarray:
    """Linear interpolation weights [dst, src] with half-pixel centers (align_corners=False)."""
    mat = np.zeros((dst, src), dtype=dtype)
    pos = np.clip((np.arange(dst) + 0.5) * (src / dst) - 0.5, 0, src - 1)
    lo = np.floor(pos).astype(np.int64)
    hi = np.minimum(lo + 1, src - 1)
    frac = pos - lo
    np.add.at(mat, (np.arange(dst), lo), 1.0 - frac)
    np.add.at(mat, (np.arange(dst), hi), frac)
    return mat


def resize_bilinear(x: Tensor, size: Tuple[int, int]) -> Tensor:
    """Bilinear resize of the last two axes to ``size``."""
    h, w = x.shape[-2], x.shape[-1]
    ho, wo = int(size[0]), int(size[1])
    if (ho, wo) == (h, w):
        return x
    ry = Tensor(_interp_matrix(h, ho, x.dtype))
    rx_t = Tensor(_interp_matrix(w, wo, x.dtype).T.copy())
    return matmul(matmul(ry, x), rx_t)


# ------------------------------------------------------------------- fourier
def dft2(x: Tensor) -> Tensor:
    """Unitary 2D DFT of the last two axes; returns [..., H, W, 2] (real, imaginary)."""
    spec = np.fft.fft2(x.data, norm="ortho")
    out = np.stack([spec.real, spec.imag], axis=-1).astype(x.dtype)

    def backward(g):
        grad = np.fft.fft2(g[..., 0] - 1j * g[..., 1], norm="ortho").real
        return (grad.astype(x.dtype),)

    return record(out, (x,), backward, "dft2")


def complex_abs(z: Tensor) -> Tensor:
    """Magnitude sqrt(re^2 + im^2) of a [..., 2] tensor; the gradient at zero is taken as 0."""
    re, im = z.data[..., 0], z.data[..., 1]
    amp = np.hypot(re, im)

    def backward(g):
        safe = np.where(amp > 0, amp, 1.0)
        scale = np.where(amp > 0, g / safe, 0.0)
        return (np.stack([scale * re, scale * im], axis=-1),)

    return record(amp, (z,), backward, "complex_abs")


def dft2_amplitude(image: Tensor) -> Tensor:
    """Amplitude spectrum |F(image)| under the 1/sqrt(HW) normalization."""
    return complex_abs(dft2(image))


# -------------------------------------------------------------------- losses
def l1(pred: Tensor, target: ArrayLike) -> Tensor:
    return mean(tabs(pred - as_tensor(target, like=pred)))


def masked_l1(pred: Tensor, target: ArrayLike, mask: ArrayLike, flags: Optional[Set[str]] = None) -> Tensor:
    """sum |M * (pred - target)| / sum(M), with M broadcast to the prediction's shape.

    An all-zero mask yields 0 and adds ``"empty_mask"`` to ``flags``.
    """
    m = mask.data if isinstance(mask, Tensor) else np.asarray(mask)
    m = np.broadcast_to(m.astype(pred.dtype), pred.shape)
    mass = float(m.sum())
    if mass == 0.0:
        logger.warning("[LOSS] masked_l1 over an empty mask, returning 0")
        if flags is not None:
            flags.add("empty_mask")
        return Tensor(np.zeros((), dtype=pred.dtype))
    diff = tabs((pred - as_tensor(target, like=pred)) * Tensor(m))
    return tsum(diff) * (1.0 / mass)


BCE_EPS = 1e-6


def bce(target: ArrayLike, pred: Tensor, eps: float = BCE_EPS) -> Tensor:
    """Mean binary cross entropy; predictions clamped to [eps, 1 - eps]."""
    t = as_tensor(target, like=pred)
    p = clip(pred, eps, 1.0 - eps)
    return mean(-(t * log(p) + (1.0 - t) * log(1.0 - p)))


def lrelu(x: Tensor) -> Tensor:
    """LeakyReLU(0.2), the activation used throughout the networks."""
    return leaky_relu(x, 0.2)

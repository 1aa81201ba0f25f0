"""
Central finite-difference gradient checks (double precision).

The reported error is max_i |analytic_i - numeric_i| / max(max|analytic|, max|numeric|),
i.e. the worst coordinate error relative to the gradient's scale.
"""
from __future__ import annotations

import logging
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from .errors import NonFiniteError
from .tensor import Parameter, Tensor, no_grad

logger = logging.getLogger(__name__)

GRADCHECK_TOLERANCE = 1e-3


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(analytic), initial=0.0)), float(np.max(np.abs(numeric), initial=0.0)), 1e-12)
    return float(np.max(np.abs(analytic - numeric), initial=0.0)) / scale


def _scalar(value: Tensor, where: str) -> float:
    if value.size != 1:
        raise ValueError(f"gradcheck: function must return a scalar, got shape {value.shape}")
    out = value.item()
    if not np.isfinite(out):
        raise NonFiniteError(f"gradcheck: f({where}) is not finite", op="gradcheck")
    return out


def _coordinates(size: int, max_coords: Optional[int], seed: int) -> np.ndarray:
    if max_coords is None or max_coords >= size:
        return np.arange(size)
    return np.sort(np.random.default_rng(seed).choice(size, size=max_coords, replace=False))


def finite_diff_gradcheck(f: Callable[[Tensor], Tensor], x, h: float = 1e-4,
                          max_coords: Optional[int] = None, seed: int = 0) -> float:
    """Compare reverse-mode d f / d x against (f(x+h) - f(x-h)) / 2h per coordinate.

    Args:
        f: Scalar-valued function of one tensor
        x: Point (Tensor or array); evaluated in float64
        h: Step
        max_coords: Optionally check only a seeded random subset of coordinates

    Returns:
        Maximum relative error

    Raises:
        NonFiniteError: f(x) is not finite
    """
    x0 = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    xt = Tensor(x0.copy(), requires_grad=True)
    out = f(xt)
    _scalar(out, "x")
    out.backward()
    analytic = xt.grad if xt.grad is not None else np.zeros_like(x0)

    coords = _coordinates(x0.size, max_coords, seed)
    numeric = np.empty(len(coords))
    with no_grad():
        for n, i in enumerate(coords):
            xp = x0.copy()
            xp.flat[i] += h
            xm = x0.copy()
            xm.flat[i] -= h
            numeric[n] = (_scalar(f(Tensor(xp)), "x+h") - _scalar(f(Tensor(xm)), "x-h")) / (2.0 * h)
    return relative_error(analytic.reshape(-1)[coords], numeric)


def gradcheck_parameters(loss_fn: Callable[[], Tensor], params: Sequence[Parameter], h: float = 1e-4,
                         max_coords: Optional[int] = 8, seed: int = 0) -> Dict[str, float]:
    """Gradient check of a closure's loss with respect to model parameters.

    Parameters are perturbed in place and restored. Returns the relative error
    per parameter name.
    """
    for p in params:
        p.grad = None
    loss = loss_fn()
    _scalar(loss, "params")
    loss.backward()
    errors: Dict[str, float] = {}
    for idx, p in enumerate(params):
        name = p.name or f"param{idx}"
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        coords = _coordinates(p.size, max_coords, seed + idx)
        numeric = np.empty(len(coords))
        original = p.data
        with no_grad():
            for n, i in enumerate(coords):
                plus = original.copy()
                plus.flat[i] += h
                p.data = plus
                f_plus = _scalar(loss_fn(), name)
                minus = original.copy()
                minus.flat[i] -= h
                p.data = minus
                f_minus = _scalar(loss_fn(), name)
                numeric[n] = (f_plus - f_minus) / (2.0 * h)
        p.data = original
        errors[name] = relative_error(analytic.reshape(-1)[coords], numeric)
        logger.debug(f"[GRADCHECK] {name}: rel error {errors[name]:.3e}")
    return errors

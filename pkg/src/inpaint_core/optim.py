"""
Adam with bias correction and the step-decay learning-rate schedule.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import NonFiniteError
from .tensor import Parameter

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """Optimizer moments keyed by parameter name.

    Attributes:
        m: First moment per parameter
        v: Second moment per parameter (elementwise >= 0)
        step: Number of completed updates
    """
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def _param_key(param: Parameter, index: int) -> str:
    return param.name or f"param{index}"


def adam_step(params: Sequence[Parameter], grads: Sequence[Optional[np.ndarray]],
              state: AdamState) -> AdamState:
    """Apply one Adam update in place.

    A missing gradient (None) counts as zero.

    Raises:
        NonFiniteError: A gradient contains NaN/Inf (names the parameter)
    """
    checked: List[Tuple[str, Parameter, np.ndarray]] = []
    for i, (param, grad) in enumerate(zip(params, grads)):
        key = _param_key(param, i)
        g = np.zeros_like(param.data) if grad is None else np.asarray(grad, dtype=param.dtype)
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for parameter '{key}'", parameter=key)
        checked.append((key, param, g))

    state.step += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** state.step
    correction2 = 1.0 - b2 ** state.step
    for key, param, g in checked:
        m = state.m.get(key)
        v = state.v.get(key)
        if m is None:
            m = np.zeros_like(param.data)
            v = np.zeros_like(param.data)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        state.m[key], state.v[key] = m, v
        update = state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
        param.data = (param.data - update).astype(param.dtype)
    return state


class Adam:
    """Adam over a fixed parameter list, reading ``Parameter.grad``."""

    def __init__(self, params: Sequence[Parameter], lr: float = 1e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)

    @property
    def lr(self) -> float:
        return self.state.lr

    @lr.setter
    def lr(self, value: float) -> None:
        self.state.lr = float(value)

    def step(self) -> None:
        adam_step(self.params, [p.grad for p in self.params], self.state)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def state_arrays(self, prefix: str = "optim") -> Dict[str, np.ndarray]:
        """Flatten moments for checkpointing (``optim.m.<name>`` / ``optim.v.<name>``)."""
        out: Dict[str, np.ndarray] = {}
        for key, arr in self.state.m.items():
            out[f"{prefix}.m.{key}"] = arr
        for key, arr in self.state.v.items():
            out[f"{prefix}.v.{key}"] = arr
        return out

    def load_state_arrays(self, arrays: Dict[str, np.ndarray], step: int, prefix: str = "optim") -> None:
        self.state.m = {k[len(prefix) + 3:]: np.array(v) for k, v in arrays.items() if k.startswith(f"{prefix}.m.")}
        self.state.v = {k[len(prefix) + 3:]: np.array(v) for k, v in arrays.items() if k.startswith(f"{prefix}.v.")}
        self.state.step = int(step)


class MultiStepSchedule:
    """lr = base_lr * gamma ** (number of milestones <= iteration)."""

    def __init__(self, base_lr: float, milestones: Sequence[int], gamma: float = 0.1):
        self.base_lr = base_lr
        self.milestones = sorted(int(m) for m in milestones)
        self.gamma = gamma

    def lr_at(self, iteration: int) -> float:
        drops = sum(1 for m in self.milestones if iteration >= m)
        return self.base_lr * self.gamma ** drops

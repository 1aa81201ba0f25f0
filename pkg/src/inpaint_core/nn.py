"""
Parameter containers and the layers the networks are assembled from.

``Module`` discovers parameters, buffers and sub-modules from instance
attributes in assignment order, so dotted parameter names are deterministic
and unique (``encoder.0.conv.weight``). All initialisation draws from a
caller-supplied ``np.random.Generator``.
"""
from __future__ import annotations

import logging
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .errors import CheckpointError, ShapeError
from .functional import conv2d, conv3d, layer_norm
from .tensor import DEFAULT_DTYPE, Parameter, Tensor, matmul, reshape

logger = logging.getLogger(__name__)

LEAKY_SLOPE = 0.2


class Module:
    """Base class: parameter registry, buffers, train/eval mode."""

    def __init__(self):
        self.training = True
        self._buffers: Dict[str, np.ndarray] = {}

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    # ----------------------------------------------------------- discovery
    def named_children(self) -> Iterator[Tuple[str, "Module"]]:
        for key, value in vars(self).items():
            if isinstance(value, Module):
                yield key, value

    def named_parameters(self, prefix: str = "") -> List[Tuple[str, Parameter]]:
        """All parameters with dotted names; also stamps ``Parameter.name``."""
        found: List[Tuple[str, Parameter]] = []
        seen = set()
        for key, value in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(value, Parameter):
                if id(value) in seen:
                    continue
                seen.add(id(value))
                value.name = name
                found.append((name, value))
            elif isinstance(value, Module):
                for sub_name, param in value.named_parameters(prefix=f"{name}."):
                    if id(param) not in seen:
                        seen.add(id(param))
                        found.append((sub_name, param))
        return found

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix: str = "") -> List[Tuple[str, np.ndarray]]:
        found = [(f"{prefix}{key}", buf) for key, buf in self._buffers.items()]
        for key, child in self.named_children():
            found.extend(child.named_buffers(prefix=f"{prefix}{key}."))
        return found

    def register_buffer(self, name: str, value: np.ndarray) -> None:
        self._buffers[name] = np.asarray(value)

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    # --------------------------------------------------------------- state
    def state_dict(self) -> Dict[str, np.ndarray]:
        state = {name: p.data.copy() for name, p in self.named_parameters()}
        state.update({f"buffer:{name}": buf.copy() for name, buf in self.named_buffers()})
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray], strict: bool = True) -> None:
        """Copy arrays into parameters/buffers by name.

        Raises:
            CheckpointError: missing or unexpected names (strict) or shape mismatch
        """
        params = dict(self.named_parameters())
        expected = set(params) | {f"buffer:{n}" for n, _ in self.named_buffers()}
        missing = sorted(expected - set(state))
        unexpected = sorted(k for k in state if k not in expected and not k.startswith("optim."))
        if strict and (missing or unexpected):
            raise CheckpointError(f"state mismatch: missing={missing[:5]} unexpected={unexpected[:5]}")
        for name, param in params.items():
            if name not in state:
                continue
            value = np.asarray(state[name])
            if value.shape != param.shape:
                raise CheckpointError(f"shape mismatch for {name}: checkpoint {value.shape} vs model {param.shape}")
            param.data = value.astype(param.dtype, copy=True)
        self._load_buffers(state, prefix="")

    def _load_buffers(self, state: Dict[str, np.ndarray], prefix: str) -> None:
        for key in self._buffers:
            full = f"buffer:{prefix}{key}"
            if full in state:
                self._buffers[key] = np.asarray(state[full]).copy()
        for key, child in self.named_children():
            child._load_buffers(state, prefix=f"{prefix}{key}.")

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for _, child in self.named_children():
            child.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def astype(self, dtype) -> "Module":
        for p in self.parameters():
            p.data = p.data.astype(dtype)
        return self


class ModuleList(Module):
    """Ordered list of sub-modules named ``0``, ``1``, ..."""

    def __init__(self, modules: Sequence[Module] = ()):
        super().__init__()
        self._count = 0
        for module in modules:
            self.append(module)

    def append(self, module: Module) -> None:
        setattr(self, str(self._count), module)
        self._count += 1

    def __len__(self) -> int:
        return self._count

    def __getitem__(self, index: int) -> Module:
        if index < 0:
            index += self._count
        return getattr(self, str(index))

    def __iter__(self) -> Iterator[Module]:
        return (getattr(self, str(i)) for i in range(self._count))


# ---------------------------------------------------------------- init helpers
def kaiming_uniform(rng: np.random.Generator, shape: Sequence[int], fan_in: int,
                    slope: float = LEAKY_SLOPE, dtype=DEFAULT_DTYPE) -> np.ndarray:
    bound = np.sqrt(6.0 / ((1.0 + slope ** 2) * max(fan_in, 1)))
    return rng.uniform(-bound, bound, size=tuple(shape)).astype(dtype)


def linear_uniform(rng: np.random.Generator, shape: Sequence[int], fan_in: int, dtype=DEFAULT_DTYPE) -> np.ndarray:
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=tuple(shape)).astype(dtype)


# ---------------------------------------------------------------------- layers
class Linear(Module):
    """y = x @ W + b with W stored as [in, out]."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator,
                 bias: bool = True, zero_init: bool = False, dtype=DEFAULT_DTYPE):
        super().__init__()
        shape = (in_features, out_features)
        init = np.zeros(shape, dtype=dtype) if zero_init else linear_uniform(rng, shape, in_features, dtype)
        self.weight = Parameter(init)
        self.bias = Parameter(np.zeros(out_features, dtype=dtype)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.weight.shape[0]:
            raise ShapeError(f"Linear expects last dim {self.weight.shape[0]}, got {x.shape}")
        out = matmul(x, self.weight)
        return out + self.bias if self.bias is not None else out


class Conv2d(Module):
    """2D convolution layer over [N,C,H,W]."""

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int, rng: np.random.Generator,
                 stride: int = 1, padding: int = 0, dilation: int = 1, groups: int = 1,
                 bias: bool = True, zero_init: bool = False, dtype=DEFAULT_DTYPE):
        super().__init__()
        k = kernel_size
        shape = (out_channels, in_channels // groups, k, k)
        fan_in = (in_channels // groups) * k * k
        init = np.zeros(shape, dtype=dtype) if zero_init else kaiming_uniform(rng, shape, fan_in, dtype=dtype)
        self.weight = Parameter(init)
        self.bias = Parameter(np.zeros(out_channels, dtype=dtype)) if bias else None
        self.stride, self.padding, self.dilation, self.groups = stride, padding, dilation, groups

    def forward(self, x: Tensor) -> Tensor:
        return conv2d(x, self.weight, self.bias, self.stride, self.padding, self.dilation, self.groups)


def _l2_normalize(v: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    return v / max(float(np.linalg.norm(v)), eps)


class Conv3d(Module):
    """Spatiotemporal convolution with optional spectral weight normalization.

    With ``spectral_norm=True`` the kernel is divided by a power-iteration
    estimate of its largest singular value (weight viewed as [C_out, -1]).
    The ``sn_u`` buffer is refreshed once per forward pass in training mode.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel_size: Tuple[int, int, int],
                 rng: np.random.Generator, stride: Tuple[int, int, int] = (1, 1, 1),
                 padding: Tuple[int, int, int] = (0, 0, 0), bias: bool = True,
                 spectral_norm: bool = False, power_iterations: int = 1, dtype=DEFAULT_DTYPE):
        super().__init__()
        kt, kh, kw = kernel_size
        shape = (out_channels, in_channels, kt, kh, kw)
        fan_in = in_channels * kt * kh * kw
        self.weight = Parameter(kaiming_uniform(rng, shape, fan_in, dtype=dtype))
        self.bias = Parameter(np.zeros(out_channels, dtype=dtype)) if bias else None
        self.stride, self.padding = tuple(stride), tuple(padding)
        self.spectral_norm = spectral_norm
        self.power_iterations = power_iterations
        if spectral_norm:
            self.register_buffer("sn_u", _l2_normalize(rng.normal(size=out_channels)))

    def power_iterate(self, steps: int) -> float:
        """Advance the power iteration ``steps`` times; returns the current sigma estimate."""
        mat = self.weight.data.reshape(self.weight.shape[0], -1).astype(np.float64)
        u = self._buffers["sn_u"]
        for _ in range(steps):
            v = _l2_normalize(mat.T @ u)
            u = _l2_normalize(mat @ v)
        self._buffers["sn_u"] = u
        v = _l2_normalize(mat.T @ u)
        return float(u @ mat @ v)

    def effective_weight(self) -> Tensor:
        if not self.spectral_norm:
            return self.weight
        if self.training:
            self.power_iterate(self.power_iterations)
        c_out = self.weight.shape[0]
        mat = self.weight.data.reshape(c_out, -1).astype(np.float64)
        u = self._buffers["sn_u"]
        v = _l2_normalize(mat.T @ u)
        dtype = self.weight.dtype
        sigma = matmul(matmul(Tensor(u.reshape(1, -1).astype(dtype)), reshape(self.weight, (c_out, -1))),
                       Tensor(v.reshape(-1, 1).astype(dtype)))
        return self.weight / reshape(sigma, (1, 1, 1, 1, 1))

    def forward(self, x: Tensor) -> Tensor:
        return conv3d(x, self.effective_weight(), self.bias, self.stride, self.padding)


class LayerNorm(Module):
    """Layer normalization over the last axis with learnable gamma/beta."""

    def __init__(self, dim: int, eps: float = 1e-5, dtype=DEFAULT_DTYPE):
        super().__init__()
        self.gamma = Parameter(np.ones(dim, dtype=dtype))
        self.beta = Parameter(np.zeros(dim, dtype=dtype))
        self.eps = eps

    def forward(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gamma, self.beta, self.eps)

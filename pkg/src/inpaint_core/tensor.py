"""
Reverse-mode automatic differentiation over numpy arrays.

A ``Tensor`` wraps an ``np.ndarray``. Every operation on tracked tensors
records its parents and a vector-Jacobian product closure; ``backward()``
walks that graph in reverse topological order and accumulates gradients on
the tracked leaves (``Parameter`` objects or tensors created with
``requires_grad=True``).

Example:
    x = Tensor(np.ones((2, 3)), requires_grad=True)
    y = (x * 3.0).sum()
    y.backward()
    x.grad  # array of 3.0
"""
from __future__ import annotations

import logging
from contextlib import contextmanager
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from .errors import NonFiniteError, ShapeError

logger = logging.getLogger(__name__)

ArrayLike = Union["Tensor", np.ndarray, float, int]
Backward = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]

DEFAULT_DTYPE = np.float64


class _GradMode:
    enabled: bool = True
    anomaly: bool = False


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording inside the block."""
    previous = _GradMode.enabled
    _GradMode.enabled = False
    try:
        yield
    finally:
        _GradMode.enabled = previous


@contextmanager
def detect_anomaly() -> Iterator[None]:
    """Raise NonFiniteError as soon as any op produces NaN/Inf (values or gradients)."""
    previous = _GradMode.anomaly
    _GradMode.anomaly = True
    try:
        yield
    finally:
        _GradMode.anomaly = previous


def is_grad_enabled() -> bool:
    return _GradMode.enabled


class Tensor:
    """N-dimensional real array taking part in reverse-mode differentiation.

    Attributes:
        data: Values (``np.ndarray``, floating dtype)
        grad: Accumulated gradient after ``backward()``, same shape as ``data``
        requires_grad: Whether the tensor is tracked by the tape
        name: Optional identifier (set for parameters)
    """

    # ndarray (op) Tensor must dispatch to the Tensor's reflected operator
    __array_ufunc__ = None

    def __init__(self, data: ArrayLike, requires_grad: bool = False, name: Optional[str] = None,
                 dtype: Optional[np.dtype] = None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind != "f":
            arr = arr.astype(DEFAULT_DTYPE)
        self.data: np.ndarray = arr
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._parents: Tuple[Tensor, ...] = ()
        self._backward: Optional[Backward] = None
        self._op = "leaf"

    # ------------------------------------------------------------------ info
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def op(self) -> str:
        return self._op

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __len__(self) -> int:
        return self.data.shape[0]

    def __repr__(self) -> str:
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, op={self._op}{tag})"

    # -------------------------------------------------------------- backward
    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """Accumulate d(self)/d(leaf) into every tracked leaf reachable from self.

        Args:
            grad: Upstream gradient; defaults to ones for a single-element tensor

        Raises:
            ShapeError: If grad is omitted for a non-scalar tensor
        """
        if grad is None:
            if self.data.size != 1:
                raise ShapeError(f"backward() without grad needs a single-element tensor, got shape {self.shape}")
            grad = np.ones_like(self.data)
        grad = np.asarray(grad, dtype=self.data.dtype)
        if grad.shape != self.shape:
            raise ShapeError(f"backward grad shape {grad.shape} does not match tensor shape {self.shape}")
        if not self.requires_grad:
            return

        order = _topological_order(self)
        grads = {id(self): grad}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if _GradMode.anomaly and not np.all(np.isfinite(g)):
                raise NonFiniteError(f"non-finite gradient flowing into op '{node._op}'", op=node._op)
            if node._backward is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            parent_grads = node._backward(g)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    # ------------------------------------------------------------ operators
    def __add__(self, other: ArrayLike) -> "Tensor":
        return add(self, other)

    def __radd__(self, other: ArrayLike) -> "Tensor":
        return add(other, self)

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        return mul(other, self)

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        return div(self, other)

    def __rtruediv__(self, other: ArrayLike) -> "Tensor":
        return div(other, self)

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __pow__(self, exponent: float) -> "Tensor":
        return power(self, exponent)

    def __matmul__(self, other: ArrayLike) -> "Tensor":
        return matmul(self, other)

    def __rmatmul__(self, other: ArrayLike) -> "Tensor":
        return matmul(other, self)

    def __getitem__(self, index) -> "Tensor":
        return getitem(self, index)

    # --------------------------------------------------------------- methods
    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def permute(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return permute(self, axes)

    def transpose(self, axis1: int = -2, axis2: int = -1) -> "Tensor":
        axes = list(range(self.ndim))
        axes[axis1], axes[axis2] = axes[axis2], axes[axis1]
        return permute(self, axes)

    def exp(self) -> "Tensor":
        return exp(self)

    def log(self) -> "Tensor":
        return log(self)

    def sqrt(self) -> "Tensor":
        return sqrt(self)

    def abs(self) -> "Tensor":
        return tabs(self)

    def sigmoid(self) -> "Tensor":
        return sigmoid(self)

    def tanh(self) -> "Tensor":
        return tanh(self)

    def relu(self) -> "Tensor":
        return relu(self)


class Parameter(Tensor):
    """Tracked leaf tensor owned by a model; ``name`` is unique within that model."""

    def __init__(self, data: ArrayLike, name: Optional[str] = None, dtype: Optional[np.dtype] = None):
        super().__init__(data, requires_grad=True, name=name, dtype=dtype)

    def __repr__(self) -> str:
        return f"Parameter(name={self.name!r}, shape={self.shape})"


# ---------------------------------------------------------------- plumbing
def as_tensor(value: ArrayLike, like: Optional[Tensor] = None) -> Tensor:
    """Wrap constants; constants adopt the dtype of ``like`` so float32 graphs stay float32."""
    if isinstance(value, Tensor):
        return value
    dtype = like.data.dtype if like is not None else None
    return Tensor(np.asarray(value, dtype=dtype))


def record(data: np.ndarray, parents: Sequence[Tensor], backward: Backward, op: str) -> Tensor:
    """Create an op output and, when grad mode is on and any parent is tracked, link it to the tape."""
    out = Tensor(data)
    if _GradMode.anomaly and not np.all(np.isfinite(out.data)):
        raise NonFiniteError(f"op '{op}' produced non-finite values", op=op)
    out._op = op
    if _GradMode.enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _topological_order(root: Tensor) -> List[Tensor]:
    order: List[Tensor] = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} cannot be broadcast") from None


# -------------------------------------------------------------- elementwise
def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _pair(a, b)
    _check_broadcast("add", a, b)
    return record(a.data + b.data, (a, b),
                  lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)), "add")


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _pair(a, b)
    _check_broadcast("sub", a, b)
    return record(a.data - b.data, (a, b),
                  lambda g: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape)), "sub")


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _pair(a, b)
    _check_broadcast("mul", a, b)
    return record(a.data * b.data, (a, b),
                  lambda g: (unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)), "mul")


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _pair(a, b)
    _check_broadcast("div", a, b)
    out = a.data / b.data

    def backward(g):
        return unbroadcast(g / b.data, a.shape), unbroadcast(-g * out / b.data, b.shape)

    return record(out, (a, b), backward, "div")


def neg(a: Tensor) -> Tensor:
    return record(-a.data, (a,), lambda g: (-g,), "neg")


def power(a: Tensor, exponent: float) -> Tensor:
    out = a.data ** exponent
    return record(out, (a,), lambda g: (g * exponent * a.data ** (exponent - 1),), "pow")


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return record(out, (a,), lambda g: (g * out,), "exp")


def log(a: Tensor) -> Tensor:
    return record(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)
    return record(out, (a,), lambda g: (g * 0.5 / out,), "sqrt")


def tabs(a: Tensor) -> Tensor:
    return record(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),), "abs")


def sigmoid(a: Tensor) -> Tensor:
    out = expit(a.data)
    return record(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return record(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def relu(a: Tensor) -> Tensor:
    return record(np.maximum(a.data, 0.0), (a,), lambda g: (g * (a.data > 0),), "relu")


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    factor = np.where(a.data > 0, 1.0, slope).astype(a.data.dtype)
    return record(a.data * factor, (a,), lambda g: (g * factor,), "leaky_relu")


def clip(a: Tensor, low: float, high: float) -> Tensor:
    inside = (a.data >= low) & (a.data <= high)
    return record(np.clip(a.data, low, high), (a,), lambda g: (g * inside,), "clip")


def where(condition: np.ndarray, a: ArrayLike, b: ArrayLike) -> Tensor:
    """Select from a where condition (a constant boolean array) holds, else from b."""
    a, b = _pair(a, b)
    cond = np.asarray(condition, dtype=bool)
    out = np.where(cond, a.data, b.data)
    return record(out, (a, b), lambda g: (unbroadcast(g * cond, a.shape),
                                          unbroadcast(g * ~cond, b.shape)), "where")


def _pair(a: ArrayLike, b: ArrayLike) -> Tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        return a, as_tensor(b, like=a)
    b = as_tensor(b)
    return as_tensor(a, like=b), b


# -------------------------------------------------------------- reductions
def _normalize_axes(axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(ax % ndim for ax in axis))


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axis, a.ndim)
    out = a.data.sum(axis=axes, keepdims=keepdims)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape).copy(),)

    return record(np.asarray(out), (a,), backward, "sum")


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axis, a.ndim)
    count = int(np.prod([a.shape[ax] for ax in axes])) if axes else 1
    return tsum(a, axis=axes, keepdims=keepdims) * (1.0 / max(count, 1))


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax (max-subtracted) along ``axis``."""
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return record(out, (a,), backward, "softmax")


# ------------------------------------------------------------------ linear
def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Batched matrix product with numpy broadcasting over leading dims."""
    a, b = _pair(a, b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs operands with ndim >= 2, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    try:
        out = np.matmul(a.data, b.data)
    except ValueError:
        raise ShapeError(f"matmul batch dimensions incompatible: {a.shape} @ {b.shape}") from None

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return unbroadcast(ga, a.shape), unbroadcast(gb, b.shape)

    return record(out, (a, b), backward, "matmul")


# ------------------------------------------------------------------- shape
def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(s) for s in shape)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"cannot reshape {a.shape} into {shape}") from None
    return record(out, (a,), lambda g: (g.reshape(a.shape),), "reshape")


def permute(a: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(int(ax) % a.ndim for ax in axes)
    if sorted(axes) != list(range(a.ndim)):
        raise ShapeError(f"permute axes {axes} invalid for shape {a.shape}")
    inverse = tuple(np.argsort(axes))
    return record(a.data.transpose(axes), (a,), lambda g: (g.transpose(inverse),), "permute")


def _is_basic_index(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (slice, int, np.integer)) or i is None or i is Ellipsis for i in items)


def getitem(a: Tensor, index) -> Tensor:
    """Slicing and integer-array indexing; gradients scatter back (with accumulation)."""
    out = a.data[index]
    basic = _is_basic_index(index)

    def backward(g):
        full = np.zeros_like(a.data)
        if basic:
            full[index] = g
        else:
            np.add.at(full, index, g)
        return (full,)

    return record(np.array(out, copy=True), (a,), backward, "getitem")


def take(a: Tensor, indices: Sequence[int], axis: int) -> Tensor:
    """Gather along one axis with a 1-D index list (repeats allowed)."""
    idx = np.asarray(indices, dtype=np.int64)
    axis = axis % a.ndim
    out = np.take(a.data, idx, axis=axis)

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(np.moveaxis(full, axis, 0), idx, np.moveaxis(g, axis, 0))
        return (full,)

    return record(out, (a,), backward, "take")


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat needs at least one tensor")
    ndim = tensors[0].ndim
    axis = axis % ndim
    ref = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != ndim or any(t.shape[i] != ref[i] for i in range(ndim) if i != axis):
            raise ShapeError(f"concat along axis {axis}: shapes {ref} and {t.shape} differ off-axis")
    out = np.concatenate([t.data for t in tensors], axis=axis)
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return record(out, tensors, backward, "concat")


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    expanded = [reshape(t, t.shape[:axis % (t.ndim + 1)] + (1,) + t.shape[axis % (t.ndim + 1):])
                for t in tensors]
    return concat(expanded, axis=axis)


def pad(a: Tensor, pad_width: Sequence[Tuple[int, int]]) -> Tensor:
    """Zero padding; ``pad_width`` has one (before, after) pair per axis."""
    pad_width = tuple((int(lo), int(hi)) for lo, hi in pad_width)
    if len(pad_width) != a.ndim:
        raise ShapeError(f"pad width {pad_width} does not match ndim of {a.shape}")
    out = np.pad(a.data, pad_width)
    crop = tuple(slice(lo, lo + n) for (lo, _), n in zip(pad_width, a.shape))
    return record(out, (a,), lambda g: (g[crop],), "pad")


def zeros(shape: Sequence[int], dtype=DEFAULT_DTYPE) -> Tensor:
    return Tensor(np.zeros(tuple(shape), dtype=dtype))


def ones(shape: Sequence[int], dtype=DEFAULT_DTYPE) -> Tensor:
    return Tensor(np.ones(tuple(shape), dtype=dtype))

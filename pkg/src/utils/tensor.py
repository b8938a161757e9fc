"""
Dense tensors with reverse-mode automatic differentiation.

Each operation returns a new ``Tensor`` whose ``_backward`` closure pushes the
incoming gradient to its inputs. The graph is rebuilt on every forward pass
(define-by-run) and traversed in reverse topological order by
``Tensor.backward``. Leading dimensions broadcast like numpy; gradients of
broadcast operands are summed back to the operand's shape.

Training runs in 32-bit floats. ``float64_mode`` switches the default dtype
for newly created tensors, which the finite-difference checker relies on.
``matmul`` delegates to numpy/BLAS, whose accumulation order differs from a
naive triple loop; results agree with such a loop to 1e-5 relative in 32 bits.
"""

import contextlib
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ParameterError, ShapeError

LAYER_NORM_EPS = 1e-5

_state = {"dtype": np.float32, "grad_enabled": True}


def default_dtype():
    """Dtype used for tensors created from non-float data."""
    return _state["dtype"]


@contextlib.contextmanager
def float64_mode():
    """Create new tensors in 64-bit precision inside the block."""
    previous = _state["dtype"]
    _state["dtype"] = np.float64
    try:
        yield
    finally:
        _state["dtype"] = previous


@contextlib.contextmanager
def no_grad():
    """Skip graph construction inside the block (inference)."""
    previous = _state["grad_enabled"]
    _state["grad_enabled"] = False
    try:
        yield
    finally:
        _state["grad_enabled"] = previous


def _as_array(data, dtype=None) -> np.ndarray:
    if dtype is not None:
        return np.asarray(data, dtype=dtype)
    if isinstance(data, np.ndarray) and data.dtype in (np.float32, np.float64):
        return data
    return np.asarray(data, dtype=_state["dtype"])


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` over the axes numpy broadcast to reach it from ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """Dense n-dimensional array participating in reverse-mode differentiation.

    Args:
        data: Array-like values; float arrays keep their dtype
        requires_grad: Whether gradients should be accumulated into ``grad``
        name: Optional label used in diagnostics
    """

    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = _as_array(data)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: Tuple["Tensor", ...] = ()
        self._backward = None
        self._op = ""

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_op(cls, data: np.ndarray, parents: Sequence["Tensor"], op: str) -> "Tensor":
        """Result node of ``op``; attached to the graph only when a parent needs grad."""
        out = cls(data)
        if _state["grad_enabled"] and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._op = op
        return out

    def _accumulate(self, grad: np.ndarray) -> None:
        if grad.shape != self.data.shape:
            raise ShapeError(f"gradient of {self._op or self.name or 'leaf'}", grad.shape, self.data.shape)
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.data.dtype, copy=True)
        else:
            self.grad += grad

    # -- array protocol -------------------------------------------------------

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
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError("item", self.shape, ())
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f", name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label})"

    # -- backward pass --------------------------------------------------------

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """Propagate ``grad`` (ones for a scalar) to every tensor that requires grad."""
        if grad is None:
            if self.size != 1:
                raise ShapeError("backward on non-scalar", self.shape, ())
            grad = np.ones_like(self.data)
        self._accumulate(np.asarray(grad, dtype=self.data.dtype))
        for node in reversed(_topological_order(self)):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operators ------------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def swapaxes(self, axis1: int, axis2: int) -> "Tensor":
        return swapaxes(self, axis1, axis2)


def _topological_order(root: Tensor) -> List[Tensor]:
    """Nodes reachable from ``root``, every node after all of its inputs."""
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
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def _lift(value, like: Optional[Tensor] = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(_as_array(value, dtype))


def _pair(a, b) -> Tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        return a, _lift(b, a)
    b = _lift(b)
    return _lift(a, b), b


def zero_grad(tensors: Iterable[Tensor]) -> None:
    for t in tensors:
        t.grad = None


# -- elementwise arithmetic ---------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _pair(a, b)
    out = Tensor.from_op(a.data + b.data, (a, b), "add")
    if out.requires_grad:
        def backward(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g, a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(g, b.shape))
        out._backward = backward
    return out


def sub(a, b) -> Tensor:
    a, b = _pair(a, b)
    out = Tensor.from_op(a.data - b.data, (a, b), "sub")
    if out.requires_grad:
        def backward(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g, a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(-g, b.shape))
        out._backward = backward
    return out


def mul(a, b) -> Tensor:
    a, b = _pair(a, b)
    out = Tensor.from_op(a.data * b.data, (a, b), "mul")
    if out.requires_grad:
        def backward(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g * b.data, a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(g * a.data, b.shape))
        out._backward = backward
    return out


def div(a, b) -> Tensor:
    a, b = _pair(a, b)
    out = Tensor.from_op(a.data / b.data, (a, b), "div")
    if out.requires_grad:
        def backward(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g / b.data, a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))
        out._backward = backward
    return out


def neg(x: Tensor) -> Tensor:
    out = Tensor.from_op(-x.data, (x,), "neg")
    if out.requires_grad:
        out._backward = lambda g: x._accumulate(-g)
    return out


# -- linear algebra -----------------------------------------------------------


def matmul(a, b) -> Tensor:
    """Matrix product over the last two axes, broadcasting leading axes.

    Raises:
        ShapeError: If either operand has fewer than two axes or the inner
            extents differ
    """
    a, b = _pair(a, b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul", a.shape, b.shape)
    try:
        data = np.matmul(a.data, b.data)
    except ValueError as e:
        raise ShapeError("matmul", a.shape, b.shape) from e
    out = Tensor.from_op(data, (a, b), "matmul")
    if out.requires_grad:
        def backward(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape))
        out._backward = backward
    return out


# -- nonlinearities -----------------------------------------------------------


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    out = Tensor.from_op(np.where(mask, x.data, 0).astype(x.dtype), (x,), "relu")
    if out.requires_grad:
        out._backward = lambda g: x._accumulate(g * mask)
    return out


def sigmoid(x: Tensor) -> Tensor:
    e = np.exp(-np.abs(x.data))
    s = np.where(x.data >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(x.dtype)
    out = Tensor.from_op(s, (x,), "sigmoid")
    if out.requires_grad:
        out._backward = lambda g: x._accumulate(g * s * (1.0 - s))
    return out


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)
    out = Tensor.from_op(t, (x,), "tanh")
    if out.requires_grad:
        out._backward = lambda g: x._accumulate(g * (1.0 - t * t))
    return out


def exp(x: Tensor) -> Tensor:
    e = np.exp(x.data)
    out = Tensor.from_op(e, (x,), "exp")
    if out.requires_grad:
        out._backward = lambda g: x._accumulate(g * e)
    return out


def log(x: Tensor) -> Tensor:
    out = Tensor.from_op(np.log(x.data), (x,), "log")
    if out.requires_grad:
        out._backward = lambda g: x._accumulate(g / x.data)
    return out


def clip(x: Tensor, low: float, high: float) -> Tensor:
    """Clamp into ``[low, high]``; gradient flows only where ``x`` was inside."""
    inside = (x.data >= low) & (x.data <= high)
    out = Tensor.from_op(np.clip(x.data, low, high), (x,), "clip")
    if out.requires_grad:
        out._backward = lambda g: x._accumulate(g * inside)
    return out


def sign(x: Tensor) -> Tensor:
    """Elementwise sign with ``sign(0) = 0``; piecewise constant, so never differentiated."""
    return Tensor(np.sign(x.data))


def absolute(x: Tensor) -> Tensor:
    out = Tensor.from_op(np.abs(x.data), (x,), "abs")
    if out.requires_grad:
        out._backward = lambda g: x._accumulate(g * np.sign(x.data))
    return out


def maximum(x: Tensor, floor: float) -> Tensor:
    """Elementwise ``max(x, floor)``; gradient 1 where ``x > floor``."""
    above = x.data > floor
    out = Tensor.from_op(np.maximum(x.data, floor).astype(x.dtype), (x,), "maximum")
    if out.requires_grad:
        out._backward = lambda g: x._accumulate(g * above)
    return out


def softmax_t(x: Tensor, tau: float = 1.0, axis: int = -1) -> Tensor:
    """Temperature softmax ``exp(x_i / tau) / sum_j exp(x_j / tau)`` along ``axis``.

    Raises:
        ParameterError: If ``tau`` is not a positive finite number
    """
    tau = float(tau)
    if not np.isfinite(tau) or tau <= 0:
        raise ParameterError(f"softmax temperature must be positive, got {tau}")
    z = x.data / tau
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)
    out = Tensor.from_op(s, (x,), "softmax")
    if out.requires_grad:
        def backward(g):
            x._accumulate(s * (g - (g * s).sum(axis=axis, keepdims=True)) / tau)
        out._backward = backward
    return out


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalise the last axis to zero mean and unit variance, then apply ``gain``/``bias``."""
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError("layer_norm", x.shape, gain.shape, bias.shape)
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    out = Tensor.from_op(xhat * gain.data + bias.data, (x, gain, bias), "layer_norm")
    if out.requires_grad:
        def backward(g):
            if gain.requires_grad:
                gain._accumulate((g * xhat).reshape(-1, d).sum(axis=0))
            if bias.requires_grad:
                bias._accumulate(g.reshape(-1, d).sum(axis=0))
            if x.requires_grad:
                dxhat = g * gain.data
                x._accumulate(inv_std * (
                    dxhat
                    - dxhat.mean(axis=-1, keepdims=True)
                    - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
                ))
        out._backward = backward
    return out


# -- structure ----------------------------------------------------------------


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [_lift(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeError("concat", *(t.shape for t in tensors)) from e
    out = Tensor.from_op(data, tensors, "concat")
    if out.requires_grad:
        offsets = np.cumsum([t.shape[axis] for t in tensors])[:-1]

        def backward(g):
            for t, piece in zip(tensors, np.split(g, offsets, axis=axis)):
                if t.requires_grad:
                    t._accumulate(piece)
        out._backward = backward
    return out


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        data = x.data.reshape(shape)
    except ValueError as e:
        raise ShapeError("reshape", x.shape, tuple(shape)) from e
    out = Tensor.from_op(data, (x,), "reshape")
    if out.requires_grad:
        out._backward = lambda g: x._accumulate(g.reshape(x.shape))
    return out


def swapaxes(x: Tensor, axis1: int, axis2: int) -> Tensor:
    out = Tensor.from_op(np.swapaxes(x.data, axis1, axis2), (x,), "swapaxes")
    if out.requires_grad:
        out._backward = lambda g: x._accumulate(np.swapaxes(g, axis1, axis2))
    return out


# -- reductions ---------------------------------------------------------------

Axis = Union[None, int, Tuple[int, ...]]


def _expand_reduced(g: np.ndarray, axis: Axis, keepdims: bool) -> np.ndarray:
    if axis is None or keepdims:
        return g
    return np.expand_dims(g, axis)


def sum_over(x: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    out = Tensor.from_op(np.asarray(x.data.sum(axis=axis, keepdims=keepdims)), (x,), "sum")
    if out.requires_grad:
        out._backward = lambda g: x._accumulate(
            np.broadcast_to(_expand_reduced(g, axis, keepdims), x.shape))
    return out


def mean_over(x: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    data = np.asarray(x.data.mean(axis=axis, keepdims=keepdims))
    count = x.size // max(data.size, 1)
    out = Tensor.from_op(data, (x,), "mean")
    if out.requires_grad:
        out._backward = lambda g: x._accumulate(
            np.broadcast_to(_expand_reduced(g, axis, keepdims), x.shape) / count)
    return out


def max_over(x: Tensor, axis: int, keepdims: bool = False) -> Tensor:
    """Maximum along ``axis``; the gradient goes to the first maximal index on ties."""
    index = np.expand_dims(np.argmax(x.data, axis=axis), axis)
    data = np.take_along_axis(x.data, index, axis=axis)
    if not keepdims:
        data = np.squeeze(data, axis=axis)
    out = Tensor.from_op(data, (x,), "max")
    if out.requires_grad:
        def backward(g):
            full = np.zeros_like(x.data)
            np.put_along_axis(full, index, g if keepdims else np.expand_dims(g, axis), axis=axis)
            x._accumulate(full)
        out._backward = backward
    return out

"""Dense float64 tensors with reverse-mode automatic differentiation.

A Tensor wraps a numpy array plus a gradient slot; every operation records
a backward closure, and `backward()` walks the graph in reverse topological
order. Only the operations the encoders need are implemented: elementwise
arithmetic with broadcasting, matmul, reshape/transpose/concat/indexing,
reductions, exp/log/tanh/pow, and fused (log-)softmax. Every op validates
that its result is finite; NaN or Inf raises NumericError at the op that
produced it.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from ..errors import NumericError, ShapeError

_grad_enabled = True
_finite_checks = True


@contextmanager
def no_grad():
    """Disable graph construction (inference over frozen weights)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def set_finite_checks(enabled: bool) -> None:
    global _finite_checks
    _finite_checks = enabled


def _check_finite(data: np.ndarray, op: str) -> None:
    # a sum is NaN/Inf iff the array holds a non-finite entry; much cheaper
    # than isfinite().all() on the hot path
    if _finite_checks and not np.isfinite(data.sum()):
        raise NumericError(f"non-finite value produced by {op}")


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad and _grad_enabled
        self._backward = None
        self._parents: tuple[Tensor, ...] = ()

    # -- construction ------------------------------------------------------

    @staticmethod
    def _result(data: np.ndarray, parents: tuple["Tensor", ...], backward, op: str) -> "Tensor":
        _check_finite(data, op)
        out = Tensor(data)
        if _grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(p for p in parents if p.requires_grad)
            out._backward = backward
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> np.ndarray:
        return self.data.copy()

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- autodiff ----------------------------------------------------------

    def backward(self, grad: np.ndarray | None = None) -> None:
        if not self.requires_grad:
            raise ValueError("backward() on a tensor that does not require grad")
        if grad is None:
            if self.data.size != 1:
                raise ShapeError("backward() without a seed gradient needs a scalar")
            grad = np.ones_like(self.data)

        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))

        self.grad = np.asarray(grad, dtype=np.float64)
        for node in reversed(order):
            if node._backward is None or node.grad is None:
                continue
            node._backward(node.grad)

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad += grad

    def zero_grad(self) -> None:
        self.grad = None

    # -- arithmetic --------------------------------------------------------

    @staticmethod
    def _coerce(other) -> "Tensor":
        return other if isinstance(other, Tensor) else Tensor(other)

    def __add__(self, other):
        other = self._coerce(other)
        a, b = self, other

        def backward(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g, a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(g, b.shape))

        return Tensor._result(a.data + b.data, (a, b), backward, "add")

    __radd__ = __add__

    def __neg__(self):
        a = self

        def backward(g):
            a._accumulate(-g)

        return Tensor._result(-a.data, (a,), backward, "neg")

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    def __mul__(self, other):
        other = self._coerce(other)
        a, b = self, other

        def backward(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g * b.data, a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(g * a.data, b.shape))

        return Tensor._result(a.data * b.data, (a, b), backward, "mul")

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        a, b = self, other

        def backward(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g / b.data, a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))

        with np.errstate(divide="ignore", invalid="ignore"):
            data = a.data / b.data
        return Tensor._result(data, (a, b), backward, "div")

    def __pow__(self, exponent: float):
        a = self
        p = float(exponent)

        def backward(g):
            a._accumulate(g * p * np.power(a.data, p - 1.0))

        with np.errstate(divide="ignore", invalid="ignore"):
            data = np.power(a.data, p)
        return Tensor._result(data, (a,), backward, "pow")

    def __matmul__(self, other):
        other = self._coerce(other)
        a, b = self, other
        if a.data.shape[-1] != b.data.shape[-2 if b.ndim > 1 else 0]:
            raise ShapeError(f"matmul mismatch: {a.shape} @ {b.shape}")

        def backward(g):
            if a.requires_grad:
                ga = g @ np.swapaxes(b.data, -1, -2) if b.ndim > 1 else np.outer(g, b.data)
                a._accumulate(_unbroadcast(ga, a.shape))
            if b.requires_grad:
                gb = np.swapaxes(a.data, -1, -2) @ g if a.ndim > 1 else np.outer(a.data, g)
                b._accumulate(_unbroadcast(gb, b.shape))

        return Tensor._result(a.data @ b.data, (a, b), backward, "matmul")

    # -- shape manipulation --------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self
        old = a.shape

        def backward(g):
            a._accumulate(g.reshape(old))

        return Tensor._result(a.data.reshape(shape), (a,), backward, "reshape")

    def transpose(self, axes: tuple[int, ...]):
        a = self
        inverse = tuple(np.argsort(axes))

        def backward(g):
            a._accumulate(g.transpose(inverse))

        return Tensor._result(a.data.transpose(axes), (a,), backward, "transpose")

    def __getitem__(self, index):
        a = self

        def backward(g):
            full = np.zeros_like(a.data)
            np.add.at(full, index, g)
            a._accumulate(full)

        return Tensor._result(a.data[index], (a,), backward, "getitem")

    # -- reductions ----------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        a = self

        def backward(g):
            if axis is None:
                a._accumulate(np.full_like(a.data, np.asarray(g).item()))
                return
            gg = g if keepdims else np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(gg, a.shape).copy())

        return Tensor._result(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward, "sum")

    def mean(self, axis=None, keepdims: bool = False):
        if axis is None:
            count = self.data.size
        else:
            count = self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) / float(count)

    # -- elementwise functions ------------------------------------------------

    def exp(self):
        a = self
        out_data = np.exp(a.data)

        def backward(g):
            a._accumulate(g * out_data)

        return Tensor._result(out_data, (a,), backward, "exp")

    def log(self):
        a = self

        def backward(g):
            a._accumulate(g / a.data)

        with np.errstate(divide="ignore", invalid="ignore"):
            data = np.log(a.data)
        return Tensor._result(data, (a,), backward, "log")

    def tanh(self):
        a = self
        out_data = np.tanh(a.data)

        def backward(g):
            a._accumulate(g * (1.0 - out_data * out_data))

        return Tensor._result(out_data, (a,), backward, "tanh")

    def sqrt(self):
        return self ** 0.5


def concat(tensors: list[Tensor], axis: int = -1) -> Tensor:
    parents = tuple(tensors)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(parents, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                t._accumulate(g[tuple(sl)])

    data = np.concatenate([t.data for t in parents], axis=axis)
    return Tensor._result(data, parents, backward, "concat")


def softmax(t: Tensor, axis: int = -1) -> Tensor:
    a = t
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * out_data).sum(axis=axis, keepdims=True)
        a._accumulate(out_data * (g - inner))

    return Tensor._result(out_data, (a,), backward, "softmax")


def log_softmax(t: Tensor, axis: int = -1) -> Tensor:
    a = t
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out_data = shifted - lse
    soft = np.exp(out_data)

    def backward(g):
        a._accumulate(g - soft * g.sum(axis=axis, keepdims=True))

    return Tensor._result(out_data, (a,), backward, "log_softmax")


def gelu(t: Tensor) -> Tensor:
    """Gaussian error linear unit (tanh approximation)."""
    a = t
    x = a.data
    c = np.sqrt(2.0 / np.pi)
    x_sq = x * x
    inner = c * (x + 0.044715 * (x_sq * x))
    th = np.tanh(inner)
    out_data = 0.5 * x * (1.0 + th)

    def backward(g):
        sech2 = 1.0 - th * th
        d_inner = c * (1.0 + 3 * 0.044715 * x_sq)
        a._accumulate(g * (0.5 * (1.0 + th) + 0.5 * x * sech2 * d_inner))

    return Tensor._result(out_data, (a,), backward, "gelu")


def l2_normalize(t: Tensor, axis: int = -1, eps: float = 1e-12) -> Tensor:
    norm_sq = (t * t).sum(axis=axis, keepdims=True)
    return t / (norm_sq + eps) ** 0.5


class Parameter(Tensor):
    """A leaf tensor updated by the optimizer."""

    __slots__ = ()

    def __init__(self, data):
        super().__init__(data, requires_grad=True)
        # parameters stay trainable even when created under no_grad()
        self.requires_grad = True

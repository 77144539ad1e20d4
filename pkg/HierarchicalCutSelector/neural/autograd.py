"""
Reverse-mode automatic differentiation over numpy arrays.

A ``Tensor`` records the tensors it was computed from and a closure that
pushes its gradient back to them. ``backward()`` on a scalar walks the
recorded graph in reverse topological order. Graphs are rebuilt for every
forward pass; nothing is cached between samples.
"""

from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from HierarchicalCutSelector.exceptions import NonFiniteDetected, ShapeMismatch

ArrayLike = Union['Tensor', np.ndarray, float, int]


class Tensor:
    __slots__ = ('value', 'grad', 'requires_grad', '_parents', '_backward')

    def __init__(
        self,
        value,
        requires_grad: bool = False,
        _parents: Tuple['Tensor', ...] = (),
        _backward: Optional[Callable[[np.ndarray], None]] = None,
    ) -> None:
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = _parents if self.requires_grad else ()
        self._backward = _backward if self.requires_grad else None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    def item(self) -> float:
        return float(self.value)

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other: ArrayLike) -> 'Tensor':
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other: ArrayLike) -> 'Tensor':
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other: ArrayLike) -> 'Tensor':
        return add(as_tensor(other), neg(self))

    def __neg__(self) -> 'Tensor':
        return neg(self)

    def __mul__(self, other: ArrayLike) -> 'Tensor':
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other: ArrayLike) -> 'Tensor':
        if isinstance(other, Tensor):
            return mul(self, exp(neg(log(other))))
        return mul(self, 1.0 / float(other))

    def __matmul__(self, other: ArrayLike) -> 'Tensor':
        return matmul(self, other)

    def __getitem__(self, index) -> 'Tensor':
        return take(self, index)

    def sum(self) -> 'Tensor':
        return total(self)

    def tanh(self) -> 'Tensor':
        return tanh(self)

    def sigmoid(self) -> 'Tensor':
        return sigmoid(self)

    def exp(self) -> 'Tensor':
        return exp(self)

    def log(self) -> 'Tensor':
        return log(self)

    # -- backward ---------------------------------------------------------

    def backward(self) -> None:
        """Fill ``grad`` of every tensor this scalar depends on."""
        if self.value.size != 1:
            raise ShapeMismatch(f"backward() needs a scalar, got shape {self.shape}")
        order: List[Tensor] = []
        seen = set()
        stack: List[Tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))

        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def as_tensor(value: ArrayLike) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _accumulate(tensor: Tensor, grad: np.ndarray) -> None:
    if not tensor.requires_grad:
        return
    grad = _unbroadcast(np.asarray(grad, dtype=np.float64), tensor.value.shape)
    tensor.grad = grad.copy() if tensor.grad is None else tensor.grad + grad


def _broadcast_shape(a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise ShapeMismatch(f"Cannot broadcast {a.shape} with {b.shape}") from exc


# ---------------------------------------------------------------------------
# Elementary operations
# ---------------------------------------------------------------------------

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)

    def backward(g: np.ndarray) -> None:
        _accumulate(a, g)
        _accumulate(b, g)

    return Tensor(a.value + b.value, _parents=(a, b), _backward=backward)


def neg(a: Tensor) -> Tensor:
    return Tensor(-a.value, _parents=(a,), _backward=lambda g: _accumulate(a, -g))


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)

    def backward(g: np.ndarray) -> None:
        _accumulate(a, g * b.value)
        _accumulate(b, g * a.value)

    return Tensor(a.value * b.value, _parents=(a, b), _backward=backward)


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Matrix product for 1-D and 2-D operands."""
    a, b = as_tensor(a), as_tensor(b)
    if a.value.ndim not in (1, 2) or b.value.ndim not in (1, 2):
        raise ShapeMismatch("matmul supports 1-D and 2-D tensors only")
    if a.shape[-1] != b.shape[0]:
        raise ShapeMismatch(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")

    def backward(g: np.ndarray) -> None:
        av, bv = a.value, b.value
        if av.ndim == 1 and bv.ndim == 1:
            _accumulate(a, g * bv)
            _accumulate(b, g * av)
        elif av.ndim == 1:
            _accumulate(a, bv @ g)
            _accumulate(b, np.outer(av, g))
        elif bv.ndim == 1:
            _accumulate(a, np.outer(g, bv))
            _accumulate(b, av.T @ g)
        else:
            _accumulate(a, g @ bv.T)
            _accumulate(b, av.T @ g)

    return Tensor(a.value @ b.value, _parents=(a, b), _backward=backward)


def total(a: Tensor) -> Tensor:
    return Tensor(a.value.sum(), _parents=(a,), _backward=lambda g: _accumulate(a, np.full(a.shape, float(g))))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.value)
    return Tensor(out, _parents=(a,), _backward=lambda g: _accumulate(a, g * (1.0 - out ** 2)))


def sigmoid(a: Tensor) -> Tensor:
    out = 0.5 * (np.tanh(0.5 * a.value) + 1.0)
    return Tensor(out, _parents=(a,), _backward=lambda g: _accumulate(a, g * out * (1.0 - out)))


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.value)
    return Tensor(out, _parents=(a,), _backward=lambda g: _accumulate(a, g * out))


def log(a: Tensor) -> Tensor:
    return Tensor(np.log(a.value), _parents=(a,), _backward=lambda g: _accumulate(a, g / a.value))


def clip(a: Tensor, low: float, high: float) -> Tensor:
    """Clamp values; the gradient is zero wherever the clamp is active."""
    inside = (a.value >= low) & (a.value <= high)
    return Tensor(np.clip(a.value, low, high), _parents=(a,), _backward=lambda g: _accumulate(a, g * inside))


def take(a: Tensor, index) -> Tensor:
    def backward(g: np.ndarray) -> None:
        full = np.zeros_like(a.value)
        np.add.at(full, index, g)
        _accumulate(a, full)

    return Tensor(a.value[index], _parents=(a,), _backward=backward)


def concat(tensors: Sequence[ArrayLike]) -> Tensor:
    """Join 1-D tensors end to end."""
    parts = [as_tensor(t) for t in tensors]
    if any(p.value.ndim != 1 for p in parts):
        raise ShapeMismatch("concat joins 1-D tensors only")
    bounds = np.cumsum([0] + [p.shape[0] for p in parts])

    def backward(g: np.ndarray) -> None:
        for p, start, end in zip(parts, bounds[:-1], bounds[1:]):
            _accumulate(p, g[start:end])

    return Tensor(np.concatenate([p.value for p in parts]), _parents=tuple(parts), _backward=backward)


def stack(tensors: Sequence[ArrayLike]) -> Tensor:
    """Stack equally shaped tensors along a new leading axis."""
    parts = [as_tensor(t) for t in tensors]
    if not parts:
        raise ShapeMismatch("stack needs at least one tensor")
    if len({p.shape for p in parts}) != 1:
        raise ShapeMismatch("stack needs tensors of identical shape")

    def backward(g: np.ndarray) -> None:
        for i, p in enumerate(parts):
            _accumulate(p, g[i])

    return Tensor(np.stack([p.value for p in parts]), _parents=tuple(parts), _backward=backward)


def masked_log_softmax(logits: Tensor, allowed: np.ndarray) -> Tensor:
    """
    Log-softmax over the allowed entries of a 1-D tensor.

    Disallowed entries get ``-inf`` and receive no gradient.
    """
    allowed = np.asarray(allowed, dtype=bool)
    if allowed.shape != logits.shape:
        raise ShapeMismatch(f"Mask shape {allowed.shape} does not match logits {logits.shape}")
    if not allowed.any():
        raise ValueError("masked_log_softmax needs at least one allowed entry")
    shifted = np.where(allowed, logits.value, -np.inf)
    top = shifted[allowed].max()
    log_norm = top + np.log(np.exp(shifted[allowed] - top).sum())
    out = shifted - log_norm
    probs = np.where(allowed, np.exp(out), 0.0)

    def backward(g: np.ndarray) -> None:
        g = np.where(allowed, g, 0.0)
        _accumulate(logits, g - probs * g.sum())

    return Tensor(out, _parents=(logits,), _backward=backward)


# ---------------------------------------------------------------------------
# Parameter helpers
# ---------------------------------------------------------------------------

Params = Dict[str, np.ndarray]


def leaves(params: Params, requires_grad: bool = True) -> Dict[str, Tensor]:
    """Wrap a parameter snapshot as leaf tensors for one forward pass."""
    return {name: Tensor(value, requires_grad=requires_grad) for name, value in params.items()}


def gradients(tensors: Dict[str, Tensor]) -> Params:
    """Collect leaf gradients, zeros where a parameter was unused."""
    return {
        name: t.grad.copy() if t.grad is not None else np.zeros_like(t.value)
        for name, t in tensors.items()
    }


def check_finite(values: Union[Tensor, np.ndarray, Iterable], what: str) -> None:
    """Raise NonFiniteDetected if *values* holds NaN or infinity."""
    if isinstance(values, Tensor):
        arrays = [values.value]
    elif isinstance(values, np.ndarray):
        arrays = [values]
    elif isinstance(values, dict):
        arrays = list(values.values())
    else:
        arrays = [np.asarray(v) for v in values]
    for array in arrays:
        if not np.all(np.isfinite(array)):
            raise NonFiniteDetected(f"Non-finite values in {what}")

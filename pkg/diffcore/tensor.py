"""Reverse-mode differentiable array.

A DiffArray wraps a float64 NumPy array. Operations in ``diffcore.ops`` build a
define-by-run graph: each result remembers its parents and a closure mapping
the upstream gradient to one gradient per parent. ``backward`` walks the graph
once in reverse topological order and accumulates gradients into leaves that
require them (parameters).
"""
import itertools
from contextlib import contextmanager
from typing import Callable, Iterator, Optional, Sequence, Tuple

import numpy as np

from exceptions import GraphError, ShapeMismatchError

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_node_ids = itertools.count()
_grad_state = {'enabled': True}


@contextmanager
def grad_enabled(enabled: bool) -> Iterator[None]:
    """Temporarily enable or disable graph recording.

    Usage:
        with grad_enabled(False):
            logits = model(batch)
    """
    previous = _grad_state['enabled']
    _grad_state['enabled'] = enabled
    try:
        yield
    finally:
        _grad_state['enabled'] = previous


def is_grad_enabled() -> bool:
    return _grad_state['enabled']


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum-reduce ``grad`` over the axes that were broadcast to reach it from ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class DiffArray:
    """Dense float64 array participating in reverse-mode differentiation."""

    __array_priority__ = 1000

    def __init__(self, values, requires_grad: bool = False,
                 parents: Tuple['DiffArray', ...] = (),
                 backward_fn: Optional[BackwardFn] = None, op: str = 'leaf',
                 copy: bool = True):
        if copy:
            self.values = np.array(values, dtype=np.float64)
        else:
            self.values = np.asarray(values, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.node_id = next(_node_ids)
        self.op = op
        self._parents = parents
        self._backward_fn = backward_fn
        self._consumed = False

    @classmethod
    def from_op(cls, values: np.ndarray, parents: Sequence['DiffArray'],
                backward_fn: BackwardFn, op: str) -> 'DiffArray':
        """Create an op result, recording the graph only when a parent needs gradients."""
        parents = tuple(parents)
        if _grad_state['enabled'] and any(p.requires_grad for p in parents):
            return cls(values, requires_grad=True, parents=parents, backward_fn=backward_fn, op=op, copy=False)
        return cls(values, op=op, copy=False)

    # -- array-like surface -------------------------------------------------
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def size(self) -> int:
        return int(self.values.size)

    @property
    def is_leaf(self) -> bool:
        return self._backward_fn is None

    def item(self) -> float:
        if self.values.size != 1:
            raise ShapeMismatchError('item', [self.shape], f"item() needs a single element, got shape {self.shape}")
        return float(self.values.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.values.copy()

    def detach(self) -> 'DiffArray':
        return DiffArray(self.values)

    def zero_grad(self) -> None:
        self.grad = None

    def __len__(self) -> int:
        return self.values.shape[0]

    def __repr__(self) -> str:
        return f"DiffArray(shape={self.shape}, op='{self.op}', requires_grad={self.requires_grad})"

    # -- operators (implemented in diffcore.ops) -----------------------------
    def __add__(self, other):
        from diffcore import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from diffcore import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from diffcore import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from diffcore import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from diffcore import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from diffcore import ops
        return ops.mul(other, self)

    def __truediv__(self, other):
        from diffcore import ops
        return ops.div(self, other)

    def __rtruediv__(self, other):
        from diffcore import ops
        return ops.div(other, self)

    def __neg__(self):
        from diffcore import ops
        return ops.neg(self)

    def __matmul__(self, other):
        from diffcore import ops
        return ops.matmul(self, other)

    def __pow__(self, exponent: float):
        from diffcore import ops
        return ops.power(self, exponent)

    def __getitem__(self, index):
        from diffcore import ops
        return ops.getitem(self, index)

    def reshape(self, *shape):
        from diffcore import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, *axes):
        from diffcore import ops
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return ops.transpose(self, axes or None)

    def sum(self, axis=None, keepdims: bool = False):
        from diffcore import ops
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        from diffcore import ops
        return ops.mean(self, axis=axis, keepdims=keepdims)


def as_diff(value) -> DiffArray:
    """Wrap constants (scalars, lists, ndarrays) as non-trainable DiffArrays."""
    if isinstance(value, DiffArray):
        return value
    return DiffArray(value)


def _topological_order(root: DiffArray) -> list:
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if node.node_id in visited:
            continue
        visited.add(node.node_id)
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and parent.node_id not in visited:
                stack.append((parent, False))
    return order


def backward(loss: DiffArray) -> None:
    """
    Populate ``grad`` on every trainable leaf reachable from a scalar loss.

    Gradients accumulate into leaves, so optimizer steps clear them. A graph
    can be walked only once; run a fresh forward pass before calling again.

    Raises:
        ShapeMismatchError: loss holds more than one element
        GraphError: the graph was already consumed, or nothing requires gradients
    """
    if loss.values.size != 1:
        raise ShapeMismatchError('backward', [loss.shape], f"backward() needs a scalar loss, got shape {loss.shape}")
    if loss._consumed:
        raise GraphError('backward', "backward() already ran on this graph; run a new forward pass first")
    if not loss.requires_grad:
        raise GraphError('backward', "loss does not depend on any trainable parameter")

    grads = {loss.node_id: np.ones_like(loss.values)}
    for node in reversed(_topological_order(loss)):
        grad = grads.pop(node.node_id, None)
        if grad is None:
            continue
        if node.is_leaf:
            node.grad = np.array(grad, dtype=np.float64) if node.grad is None else node.grad + grad
            continue
        parent_grads = node._backward_fn(grad)
        for parent, parent_grad in zip(node._parents, parent_grads):
            if parent_grad is None or not parent.requires_grad:
                continue
            if parent_grad.shape != parent.shape:
                raise ShapeMismatchError(f"backward:{node.op}", [parent.shape, parent_grad.shape])
            if parent.node_id in grads:
                grads[parent.node_id] = grads[parent.node_id] + parent_grad
            else:
                grads[parent.node_id] = parent_grad
        # free closures as we go so large graphs release memory early
        node._backward_fn = _consumed_backward
        node._parents = ()
    loss._consumed = True


def _consumed_backward(grad: np.ndarray):
    raise GraphError('backward', "graph node reused after backward()")

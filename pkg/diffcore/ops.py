"""Differentiable primitives.

Every function takes DiffArrays (constants are wrapped automatically), computes
the forward value with NumPy and registers a backward rule returning one
gradient per input. Shape rules are stated per op; violations raise
ShapeMismatchError naming the offending shapes.
"""
import builtins
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from diffcore.tensor import DiffArray, as_diff, unbroadcast
from exceptions import ShapeMismatchError, VocabularyError

Axis = Optional[Union[int, Tuple[int, ...]]]


def _broadcast_shape(op: str, a: DiffArray, b: DiffArray) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeMismatchError(op, [a.shape, b.shape])


# -- elementwise arithmetic (NumPy broadcasting rules) ------------------------

def add(a, b) -> DiffArray:
    a, b = as_diff(a), as_diff(b)
    _broadcast_shape('add', a, b)

    def backward(g):
        return unbroadcast(g, a.shape), unbroadcast(g, b.shape)

    return DiffArray.from_op(a.values + b.values, (a, b), backward, 'add')


def sub(a, b) -> DiffArray:
    a, b = as_diff(a), as_diff(b)
    _broadcast_shape('sub', a, b)

    def backward(g):
        return unbroadcast(g, a.shape), unbroadcast(-g, b.shape)

    return DiffArray.from_op(a.values - b.values, (a, b), backward, 'sub')


def mul(a, b) -> DiffArray:
    a, b = as_diff(a), as_diff(b)
    _broadcast_shape('mul', a, b)

    def backward(g):
        return unbroadcast(g * b.values, a.shape), unbroadcast(g * a.values, b.shape)

    return DiffArray.from_op(a.values * b.values, (a, b), backward, 'mul')


def div(a, b) -> DiffArray:
    a, b = as_diff(a), as_diff(b)
    _broadcast_shape('div', a, b)
    out = a.values / b.values

    def backward(g):
        return unbroadcast(g / b.values, a.shape), unbroadcast(-g * out / b.values, b.shape)

    return DiffArray.from_op(out, (a, b), backward, 'div')


def neg(a) -> DiffArray:
    a = as_diff(a)
    return DiffArray.from_op(-a.values, (a,), lambda g: (-g,), 'neg')


def power(a, exponent: float) -> DiffArray:
    a = as_diff(a)
    out = a.values ** exponent

    def backward(g):
        return (g * exponent * a.values ** (exponent - 1),)

    return DiffArray.from_op(out, (a,), backward, 'power')


# -- linear algebra -------------------------------------------------------------

def matmul(a, b) -> DiffArray:
    """(..., m, n) @ (..., n, p) -> (..., m, p); leading axes broadcast."""
    a, b = as_diff(a), as_diff(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeMismatchError('matmul', [a.shape, b.shape])
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise ShapeMismatchError('matmul', [a.shape, b.shape])

    def backward(g):
        grad_a = g @ np.swapaxes(b.values, -1, -2)
        grad_b = np.swapaxes(a.values, -1, -2) @ g
        return unbroadcast(grad_a, a.shape), unbroadcast(grad_b, b.shape)

    return DiffArray.from_op(a.values @ b.values, (a, b), backward, 'matmul')


# -- reductions and reshaping --------------------------------------------------

def _normalize_axes(axis: Axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(ax % ndim for ax in axis))


def sum(a, axis: Axis = None, keepdims: bool = False) -> DiffArray:
    a = as_diff(a)
    axes = _normalize_axes(axis, a.ndim)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape),)

    return DiffArray.from_op(a.values.sum(axis=axes, keepdims=keepdims), (a,), backward, 'sum')


def mean(a, axis: Axis = None, keepdims: bool = False) -> DiffArray:
    a = as_diff(a)
    axes = _normalize_axes(axis, a.ndim)
    count = int(np.prod([a.shape[ax] for ax in axes])) if axes else 1
    return div(sum(a, axis=axes, keepdims=keepdims), float(count))


def reshape(a, shape: Sequence[int]) -> DiffArray:
    a = as_diff(a)
    try:
        out = a.values.reshape(shape)
    except ValueError:
        raise ShapeMismatchError('reshape', [a.shape, tuple(shape)])
    return DiffArray.from_op(out, (a,), lambda g: (g.reshape(a.shape),), 'reshape')


def flatten(a, start_axis: int = 1) -> DiffArray:
    """Collapse every axis from ``start_axis`` onwards into one."""
    a = as_diff(a)
    start_axis = start_axis % a.ndim
    return reshape(a, a.shape[:start_axis] + (-1,))


def transpose(a, axes: Optional[Sequence[int]] = None) -> DiffArray:
    a = as_diff(a)
    axes = tuple(range(a.ndim))[::-1] if axes is None else tuple(axes)
    inverse = tuple(np.argsort(axes))
    return DiffArray.from_op(a.values.transpose(axes), (a,), lambda g: (g.transpose(inverse),), 'transpose')


def concat(arrays: Sequence, axis: int = -1) -> DiffArray:
    """Concatenate along ``axis``; every other extent must agree."""
    arrays = [as_diff(x) for x in arrays]
    if not arrays:
        raise ShapeMismatchError('concat', [], "concat() needs at least one array")
    ndim = arrays[0].ndim
    axis = axis % ndim
    reference = arrays[0].shape[:axis] + arrays[0].shape[axis + 1:]
    for x in arrays[1:]:
        if x.ndim != ndim or x.shape[:axis] + x.shape[axis + 1:] != reference:
            raise ShapeMismatchError('concat', [y.shape for y in arrays])
    splits = np.cumsum([x.shape[axis] for x in arrays])[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return DiffArray.from_op(np.concatenate([x.values for x in arrays], axis=axis), arrays, backward, 'concat')


def stack(arrays: Sequence, axis: int = 0) -> DiffArray:
    """Stack equally shaped arrays along a new axis."""
    arrays = [as_diff(x) for x in arrays]
    if not arrays or any(x.shape != arrays[0].shape for x in arrays):
        raise ShapeMismatchError('stack', [x.shape for x in arrays])
    axis = axis % (arrays[0].ndim + 1)
    return concat([reshape(x, x.shape[:axis] + (1,) + x.shape[axis:]) for x in arrays], axis=axis)


def getitem(a, index) -> DiffArray:
    """Basic and integer-array indexing; gradients scatter-add back."""
    a = as_diff(a)
    out = a.values[index]
    parts = index if isinstance(index, tuple) else (index,)
    basic = all(isinstance(p, (int, np.integer, slice)) or p is None or p is Ellipsis for p in parts)

    def backward(g):
        grad = np.zeros_like(a.values)
        if basic:
            grad[index] += g
        else:
            np.add.at(grad, index, g)
        return (grad,)

    return DiffArray.from_op(out, (a,), backward, 'getitem')


# -- elementwise nonlinearities -------------------------------------------------

def sin(a) -> DiffArray:
    a = as_diff(a)
    return DiffArray.from_op(np.sin(a.values), (a,), lambda g: (g * np.cos(a.values),), 'sin')


def exp(a) -> DiffArray:
    a = as_diff(a)
    out = np.exp(a.values)
    return DiffArray.from_op(out, (a,), lambda g: (g * out,), 'exp')


def abs(a) -> DiffArray:
    """|a| with subgradient 0 at a == 0."""
    a = as_diff(a)
    return DiffArray.from_op(np.abs(a.values), (a,), lambda g: (g * np.sign(a.values),), 'abs')


def neg_abs(a) -> DiffArray:
    """-|a|, the exponent shape used by the radial embedding."""
    return neg(abs(a))


def tanh(a) -> DiffArray:
    a = as_diff(a)
    out = np.tanh(a.values)
    return DiffArray.from_op(out, (a,), lambda g: (g * (1.0 - out * out),), 'tanh')


def sigmoid(a) -> DiffArray:
    a = as_diff(a)
    out = 0.5 * (1.0 + np.tanh(0.5 * a.values))
    return DiffArray.from_op(out, (a,), lambda g: (g * out * (1.0 - out),), 'sigmoid')


def relu(a) -> DiffArray:
    a = as_diff(a)
    mask = (a.values > 0).astype(np.float64)
    return DiffArray.from_op(a.values * mask, (a,), lambda g: (g * mask,), 'relu')


def leaky_relu(a, slope: float = 0.01) -> DiffArray:
    a = as_diff(a)
    factor = np.where(a.values > 0, 1.0, slope)
    return DiffArray.from_op(a.values * factor, (a,), lambda g: (g * factor,), 'leaky_relu')


def softplus(a) -> DiffArray:
    a = as_diff(a)
    out = np.logaddexp(0.0, a.values)
    slope = 0.5 * (1.0 + np.tanh(0.5 * a.values))
    return DiffArray.from_op(out, (a,), lambda g: (g * slope,), 'softplus')


def softmax(a, axis: int = -1) -> DiffArray:
    a = as_diff(a)
    shifted = a.values - a.values.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return DiffArray.from_op(out, (a,), backward, 'softmax')


def log_softmax(a, axis: int = -1) -> DiffArray:
    a = as_diff(a)
    shifted = a.values - a.values.max(axis=axis, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - log_norm
    probs = np.exp(out)

    def backward(g):
        return (g - probs * g.sum(axis=axis, keepdims=True),)

    return DiffArray.from_op(out, (a,), backward, 'log_softmax')


# -- normalization ---------------------------------------------------------------

def _normalize_backward(g_hat: np.ndarray, x_hat: np.ndarray, inv_std: np.ndarray, axes: Tuple[int, ...]) -> np.ndarray:
    count = int(np.prod([x_hat.shape[ax] for ax in axes]))
    return inv_std / count * (
        count * g_hat
        - g_hat.sum(axis=axes, keepdims=True)
        - x_hat * (g_hat * x_hat).sum(axis=axes, keepdims=True)
    )


def layer_norm(x, gamma, beta, eps: float = 1e-5) -> DiffArray:
    """Normalize over the last axis; gamma/beta have the last axis' extent."""
    x, gamma, beta = as_diff(x), as_diff(gamma), as_diff(beta)
    if gamma.shape != (x.shape[-1],) or beta.shape != (x.shape[-1],):
        raise ShapeMismatchError('layer_norm', [x.shape, gamma.shape, beta.shape])
    mu = x.values.mean(axis=-1, keepdims=True)
    var = x.values.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x.values - mu) * inv_std
    reduce_axes = tuple(range(x.ndim - 1))

    def backward(g):
        g_hat = g * gamma.values
        grad_x = _normalize_backward(g_hat, x_hat, inv_std, (x.ndim - 1,))
        return grad_x, (g * x_hat).sum(axis=reduce_axes), g.sum(axis=reduce_axes)

    return DiffArray.from_op(x_hat * gamma.values + beta.values, (x, gamma, beta), backward, 'layer_norm')


def batch_norm(x, gamma, beta, running_mean: np.ndarray, running_var: np.ndarray,
               training: bool, momentum: float = 0.1, eps: float = 1e-5) -> DiffArray:
    """
    Normalize each channel (last axis) over every other axis.

    Training mode uses batch statistics and updates ``running_mean`` /
    ``running_var`` in place (unbiased variance, like common frameworks);
    eval mode uses the running statistics.
    """
    x, gamma, beta = as_diff(x), as_diff(gamma), as_diff(beta)
    channels = x.shape[-1]
    if gamma.shape != (channels,) or beta.shape != (channels,) or running_mean.shape != (channels,):
        raise ShapeMismatchError('batch_norm', [x.shape, gamma.shape, beta.shape, running_mean.shape])
    axes = tuple(range(x.ndim - 1))

    if training:
        count = int(np.prod([x.shape[ax] for ax in axes]))
        mu = x.values.mean(axis=axes, keepdims=True)
        var = x.values.var(axis=axes, keepdims=True)
        inv_std = 1.0 / np.sqrt(var + eps)
        x_hat = (x.values - mu) * inv_std
        unbiased = var.reshape(-1) * count / builtins.max(count - 1, 1)
        running_mean *= (1.0 - momentum)
        running_mean += momentum * mu.reshape(-1)
        running_var *= (1.0 - momentum)
        running_var += momentum * unbiased

        def backward(g):
            g_hat = g * gamma.values
            return (_normalize_backward(g_hat, x_hat, inv_std, axes),
                    (g * x_hat).sum(axis=axes), g.sum(axis=axes))
    else:
        inv_std = 1.0 / np.sqrt(running_var + eps)
        x_hat = (x.values - running_mean) * inv_std

        def backward(g):
            return (g * gamma.values * inv_std,
                    (g * x_hat).sum(axis=axes), g.sum(axis=axes))

    return DiffArray.from_op(x_hat * gamma.values + beta.values, (x, gamma, beta), backward, 'batch_norm')


# -- sequence ops (layout: batch, time, channels) ----------------------------------

def _window_index(length: int, kernel: int, stride: int) -> np.ndarray:
    out_len = (length - kernel) // stride + 1
    if out_len <= 0:
        raise ShapeMismatchError('window', [(length,), (kernel,)], f"kernel {kernel} longer than sequence {length}")
    return np.arange(out_len)[:, None] * stride + np.arange(kernel)[None, :]


def conv1d(x, weight, bias=None, stride: int = 1, left_padding: Optional[int] = None) -> DiffArray:
    """
    1-D convolution over time.

    x: (B, T, C_in); weight: (K, C_in, C_out); bias: (C_out,).
    ``left_padding`` zeros are prepended (default K - 1, i.e. causal), so with
    stride 1 the output keeps length T and position t sees inputs <= t.
    """
    x, weight = as_diff(x), as_diff(weight)
    if x.ndim != 3 or weight.ndim != 3 or weight.shape[1] != x.shape[2]:
        raise ShapeMismatchError('conv1d', [x.shape, weight.shape])
    kernel = weight.shape[0]
    pad = kernel - 1 if left_padding is None else left_padding
    padded = np.concatenate([np.zeros((x.shape[0], pad, x.shape[2])), x.values], axis=1)
    index = _window_index(padded.shape[1], kernel, stride)
    windows = padded[:, index, :]  # (B, T_out, K, C_in)
    out = np.tensordot(windows, weight.values, axes=([2, 3], [0, 1]))
    parents = [x, weight]
    if bias is not None:
        bias = as_diff(bias)
        if bias.shape != (weight.shape[2],):
            raise ShapeMismatchError('conv1d', [weight.shape, bias.shape])
        out = out + bias.values
        parents.append(bias)

    def backward(g):
        grad_weight = np.tensordot(windows, g, axes=([0, 1], [0, 1]))
        grad_windows = np.tensordot(g, weight.values, axes=([2], [2]))
        grad_padded = np.zeros_like(padded)
        np.add.at(grad_padded, (slice(None), index), grad_windows)
        grads = [grad_padded[:, pad:, :], grad_weight]
        if bias is not None:
            grads.append(g.sum(axis=(0, 1)))
        return tuple(grads)

    return DiffArray.from_op(out, parents, backward, 'conv1d')


def avg_pool1d(x, kernel: int, stride: Optional[int] = None) -> DiffArray:
    """Average pooling over time. x: (B, T, C) -> (B, T_out, C)."""
    x = as_diff(x)
    if x.ndim != 3:
        raise ShapeMismatchError('avg_pool1d', [x.shape])
    stride = stride or kernel
    index = _window_index(x.shape[1], kernel, stride)
    out = x.values[:, index, :].mean(axis=2)

    def backward(g):
        grad = np.zeros_like(x.values)
        spread = np.broadcast_to(g[:, :, None, :] / kernel, (g.shape[0], index.shape[0], kernel, g.shape[2]))
        np.add.at(grad, (slice(None), index), spread)
        return (grad,)

    return DiffArray.from_op(out, (x,), backward, 'avg_pool1d')


def embedding_lookup(table, index, field: str = 'embedding') -> DiffArray:
    """Rows of ``table`` (V, d) selected by an integer array of any shape."""
    table = as_diff(table)
    index = np.asarray(index)
    if index.size and not np.issubdtype(index.dtype, np.integer):
        raise VocabularyError(field, -1, table.shape[0], f"{field} indices must be integers, got {index.dtype}")
    vocab = table.shape[0]
    if index.size and (index.min() < 0 or index.max() >= vocab):
        bad = int(index.min()) if index.min() < 0 else int(index.max())
        raise VocabularyError(field, bad, vocab)

    def backward(g):
        grad = np.zeros_like(table.values)
        np.add.at(grad, index, g)
        return (grad,)

    return DiffArray.from_op(table.values[index], (table,), backward, 'embedding_lookup')

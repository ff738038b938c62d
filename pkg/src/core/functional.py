"""
Differentiable primitives.

Every primitive computes its result with numpy, wraps it in a `Tensor`, and,
when a tape is active and some input requires a gradient, records a backward
rule that maps the output gradient to one gradient per input.
"""

import math
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import erf, expit

from src.core.tensor import Tensor, current_tape
from src.utils.constants import LAYER_NORM_EPS
from src.utils.errors import ContractError, DimensionError

Operand = Union[Tensor, float, int]

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _make(op: str, out_data: np.ndarray, inputs: Tuple[Tensor, ...],
          backward: Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]) -> Tensor:
    requires_grad = any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=requires_grad)
    tape = current_tape()
    if requires_grad and tape is not None:
        tape.record(op, inputs, out, backward)
    return out


def _lift(value: Operand, like: Tensor) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=like.data.dtype))


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """
    Sum a broadcast gradient back down to an operand's shape

    Args:
        grad: Gradient with the broadcast result's shape
        shape: Shape of the operand

    Returns:
        np.ndarray: Gradient with `shape`
    """
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> Tuple[int, ...]:
    try:
        return tuple(np.broadcast_shapes(a.shape, b.shape))
    except ValueError:
        raise DimensionError(f"{op}: shapes do not broadcast", a.shape, b.shape) from None


def _axis(axis: int, ndim: int) -> int:
    if not -ndim <= axis < ndim:
        raise DimensionError(f"axis {axis} out of range for rank {ndim}")
    return axis % ndim


# ---------------------------------------------------------------------------
# Linear algebra

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product of (.., M, K) and (.., K, P)"""
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError("matmul needs operands of rank >= 2", a.shape, b.shape)
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError("matmul inner dimensions differ", a.shape, b.shape)
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise DimensionError("matmul batch dimensions do not broadcast", a.shape, b.shape) from None

    out = np.matmul(a.data, b.data)

    def backward(g: np.ndarray):
        ga = unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape) if a.requires_grad else None
        gb = unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape) if b.requires_grad else None
        return ga, gb

    return _make("matmul", out, (a, b), backward)


def transpose(x: Tensor) -> Tensor:
    """Swap the last two axes"""
    if x.ndim < 2:
        raise DimensionError("transpose needs rank >= 2", x.shape)
    out = np.swapaxes(x.data, -1, -2)
    return _make("transpose", out, (x,), lambda g: (np.swapaxes(g, -1, -2),))


def outer_product(u: Tensor, w: Tensor) -> Tensor:
    """result[.., i, j] = u[.., i] * w[.., j]"""
    if u.shape != w.shape or u.ndim < 1:
        raise DimensionError("outer_product needs vectors of equal length", u.shape, w.shape)
    out = u.data[..., :, None] * w.data[..., None, :]

    def backward(g: np.ndarray):
        gu = (g * w.data[..., None, :]).sum(axis=-1) if u.requires_grad else None
        gw = (g * u.data[..., :, None]).sum(axis=-2) if w.requires_grad else None
        return gu, gw

    return _make("outer_product", out, (u, w), backward)


# ---------------------------------------------------------------------------
# Normalization

def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Max-shifted softmax along `axis`"""
    axis = _axis(axis, x.ndim)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    exp = np.exp(shifted)
    y = exp / exp.sum(axis=axis, keepdims=True)

    def backward(g: np.ndarray):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _make("softmax", y, (x,), backward)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then scale and shift"""
    width = x.shape[-1]
    if gamma.shape != (width,) or beta.shape != (width,):
        raise DimensionError("layer_norm affine parameters must match the last axis",
                             x.shape, gamma.shape, beta.shape)
    mean = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mean
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    out = xhat * gamma.data + beta.data

    def backward(g: np.ndarray):
        lead = tuple(range(g.ndim - 1))
        ggamma = (g * xhat).sum(axis=lead) if gamma.requires_grad else None
        gbeta = g.sum(axis=lead) if beta.requires_grad else None
        gx = None
        if x.requires_grad:
            dxhat = g * gamma.data
            gx = (inv_std / width) * (
                width * dxhat
                - dxhat.sum(axis=-1, keepdims=True)
                - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
            )
        return gx, ggamma, gbeta

    return _make("layer_norm", out, (x, gamma, beta), backward)


# ---------------------------------------------------------------------------
# Elementwise

def _sigmoid(x: np.ndarray):
    y = expit(x)
    return y, lambda g: g * y * (1.0 - y)


def _tanh(x: np.ndarray):
    y = np.tanh(x)
    return y, lambda g: g * (1.0 - y * y)


def _gelu(x: np.ndarray):
    cdf = 0.5 * (1.0 + erf(x / _SQRT2))
    y = x * cdf
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return y, lambda g: g * (cdf + x * pdf)


def _negate(x: np.ndarray):
    return -x, lambda g: -g


UNARY_KINDS: Dict[str, Callable] = {
    "sigmoid": _sigmoid,
    "tanh": _tanh,
    "gelu": _gelu,
    "negate": _negate,
}


def unary_elementwise(kind: str, x: Tensor) -> Tensor:
    """
    Apply an elementwise map with a registered backward rule

    Args:
        kind: One of 'sigmoid', 'tanh', 'gelu', 'negate'
        x: Input tensor

    Returns:
        Tensor: Mapped tensor, same shape
    """
    try:
        rule = UNARY_KINDS[kind]
    except KeyError:
        raise ContractError(f"unknown elementwise kind '{kind}'") from None
    y, grad_rule = rule(x.data)
    y = y.astype(x.data.dtype, copy=False)
    return _make(kind, y, (x,), lambda g: (grad_rule(g),))


def sigmoid(x: Tensor) -> Tensor:
    return unary_elementwise("sigmoid", x)


def tanh(x: Tensor) -> Tensor:
    return unary_elementwise("tanh", x)


def gelu(x: Tensor) -> Tensor:
    return unary_elementwise("gelu", x)


def negate(x: Tensor) -> Tensor:
    return unary_elementwise("negate", x)


def binary_elementwise(kind: str, a: Operand, b: Operand) -> Tensor:
    """
    Broadcasting add, sub or mul

    Args:
        kind: One of 'add', 'sub', 'mul'
        a: Left operand (python scalars are lifted to constants)
        b: Right operand

    Returns:
        Tensor: Elementwise result with the broadcast shape
    """
    if not isinstance(a, Tensor) and not isinstance(b, Tensor):
        raise ContractError("binary_elementwise needs at least one Tensor operand")
    a = _lift(a, b if isinstance(b, Tensor) else a)
    b = _lift(b, a)
    _broadcast_shape(kind, a, b)

    if kind == "add":
        out = a.data + b.data

        def backward(g: np.ndarray):
            return (unbroadcast(g, a.shape) if a.requires_grad else None,
                    unbroadcast(g, b.shape) if b.requires_grad else None)
    elif kind == "sub":
        out = a.data - b.data

        def backward(g: np.ndarray):
            return (unbroadcast(g, a.shape) if a.requires_grad else None,
                    unbroadcast(-g, b.shape) if b.requires_grad else None)
    elif kind == "mul":
        out = a.data * b.data

        def backward(g: np.ndarray):
            return (unbroadcast(g * b.data, a.shape) if a.requires_grad else None,
                    unbroadcast(g * a.data, b.shape) if b.requires_grad else None)
    else:
        raise ContractError(f"unknown binary kind '{kind}'")

    return _make(kind, out, (a, b), backward)


def add(a: Operand, b: Operand) -> Tensor:
    return binary_elementwise("add", a, b)


def sub(a: Operand, b: Operand) -> Tensor:
    return binary_elementwise("sub", a, b)


def mul(a: Operand, b: Operand) -> Tensor:
    return binary_elementwise("mul", a, b)


# ---------------------------------------------------------------------------
# Shape

def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Ordered concatenation along `axis`; `slice_along` is its inverse"""
    if not parts:
        raise ContractError("concat needs at least one part")
    ndim = parts[0].ndim
    axis = _axis(axis, ndim)
    for part in parts[1:]:
        if part.ndim != ndim or any(
            part.shape[d] != parts[0].shape[d] for d in range(ndim) if d != axis
        ):
            raise DimensionError(f"concat along axis {axis}: non-axis dimensions differ",
                                 parts[0].shape, part.shape)
    out = np.concatenate([p.data for p in parts], axis=axis)
    bounds = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def backward(g: np.ndarray):
        pieces = np.split(g, bounds, axis=axis)
        return tuple(piece if part.requires_grad else None for piece, part in zip(pieces, parts))

    return _make("concat", out, tuple(parts), backward)


def slice_along(x: Tensor, axis: int, start: int, stop: int) -> Tensor:
    """Contiguous slice [start, stop) along `axis`"""
    axis = _axis(axis, x.ndim)
    if not 0 <= start < stop <= x.shape[axis]:
        raise DimensionError(f"slice [{start}, {stop}) out of range on axis {axis}", x.shape)
    index = [slice(None)] * x.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)
    out = x.data[index].copy()

    def backward(g: np.ndarray):
        full = np.zeros_like(x.data)
        full[index] = g
        return (full,)

    return _make("slice", out, (x,), backward)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise DimensionError(f"cannot reshape to {shape}", x.shape) from None
    return _make("reshape", out, (x,), lambda g: (g.reshape(x.shape),))


def broadcast_to(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    try:
        out = np.broadcast_to(x.data, shape).copy()
    except ValueError:
        raise DimensionError(f"cannot broadcast to {shape}", x.shape) from None
    return _make("broadcast_to", out, (x,), lambda g: (unbroadcast(g, x.shape),))


# ---------------------------------------------------------------------------
# Reductions and losses

def reduce_mean(x: Tensor, axis: int, keepdims: bool = False) -> Tensor:
    """Arithmetic mean along `axis`"""
    axis = _axis(axis, x.ndim)
    count = x.shape[axis]
    out = x.data.mean(axis=axis, keepdims=keepdims)

    def backward(g: np.ndarray):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, x.shape).copy(),)

    return _make("reduce_mean", out, (x,), backward)


def reduce_sum(x: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    """Sum along `axis`, or of all elements"""
    if axis is None:
        out = np.asarray(x.data.sum())

        def backward(g: np.ndarray):
            return (np.broadcast_to(g, x.shape).copy(),)
    else:
        axis = _axis(axis, x.ndim)
        out = x.data.sum(axis=axis, keepdims=keepdims)

        def backward(g: np.ndarray):
            if not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, x.shape).copy(),)

    return _make("reduce_sum", out, (x,), backward)


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """
    Softmax cross-entropy averaged over the batch

    Args:
        logits: Tensor of shape (B, K)
        labels: Integer class ids, shape (B,)

    Returns:
        Tensor: Scalar loss
    """
    labels = np.asarray(labels)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise DimensionError("cross_entropy needs (B, K) logits and (B,) labels",
                             logits.shape, labels.shape)
    classes = logits.shape[1]
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise ContractError(f"label id out of range [0, {classes}): "
                            f"{labels[(labels < 0) | (labels >= classes)].tolist()}")
    batch = logits.shape[0]
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    rows = np.arange(batch)
    out = np.asarray(-log_probs[rows, labels].mean())

    def backward(g: np.ndarray):
        probs = np.exp(log_probs)
        probs[rows, labels] -= 1.0
        return (probs * (g / batch),)

    return _make("cross_entropy", out.astype(logits.data.dtype), (logits,), backward)


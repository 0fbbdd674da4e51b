"""
Differentiable operations over Tensor.

Each function computes its forward value with numpy and, when any input is
recorded on a tape, records a backward closure. Operations act on the trailing
axes and accept leading batch axes unchanged; broadcasting only happens where
an operation says so (``scale``, ``linear``, ``layer_norm``, ``broadcast_to``).
"""

from __future__ import annotations

from typing import Optional, Sequence, Tuple, Union

import numpy as np

from src.autodiff.tensor import Tape, Tensor, as_tensor
from src.pipeline.errors import NumericalError, ShapeError

Axes = Union[None, int, Sequence[int]]

NORM_EPS = 1e-8
LAYER_NORM_EPS = 1e-5
LOG_FLOOR = 1e-12
_GELU_K = float(np.sqrt(2.0 / np.pi))
_GELU_C = 0.044715


def _result(kind: str, value: np.ndarray, inputs: Sequence[Optional[Tensor]], backward) -> Tensor:
    tape: Optional[Tape] = None
    for tensor in inputs:
        if tensor is not None and tensor.tape is not None:
            tape = tensor.tape
            break
    if tape is None:
        try:
            return Tensor(value)
        except NumericalError as err:
            raise NumericalError(f"Operation '{kind}' produced a non-finite value") from err
    return tape.record(kind, value, inputs, backward)


def _require_same_shape(kind: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{kind}: shape mismatch {a.shape} vs {b.shape}")


# ============================================================
# Elementwise
# ============================================================

def elementwise(a, b, kind: str) -> Tensor:
    """Elementwise add/sub/mul of equal shapes, or scale by a constant."""
    if kind == "scale":
        return scale(a, b)
    a, b = as_tensor(a), as_tensor(b)
    _require_same_shape(kind, a, b)
    x, y = a.data, b.data
    if kind == "add":
        return _result(kind, x + y, (a, b), lambda g: (g, g))
    if kind == "sub":
        return _result(kind, x - y, (a, b), lambda g: (g, -g))
    if kind == "mul":
        return _result(kind, x * y, (a, b), lambda g: (g * y, g * x))
    raise ShapeError(f"Unknown elementwise kind: {kind}. Available kinds: ['add', 'sub', 'mul', 'scale']")


def add(a, b) -> Tensor:
    return elementwise(a, b, "add")


def sub(a, b) -> Tensor:
    return elementwise(a, b, "sub")


def mul(a, b) -> Tensor:
    return elementwise(a, b, "mul")


def scale(a, c) -> Tensor:
    a = as_tensor(a)
    if isinstance(c, Tensor):
        if c.recorded:
            raise ShapeError("scale: the factor must be a constant")
        c = c.item()
    factor = float(c)
    return _result("scale", a.data * factor, (a,), lambda g: (g * factor,))


def square(a) -> Tensor:
    a = as_tensor(a)
    return mul(a, a)


# ============================================================
# Products and layout
# ============================================================

def matmul(a, b) -> Tensor:
    """
    Matrix product over the last two axes.

    ``b`` is either 2-D (shared across every leading axis of ``a``) or has the
    same leading axes as ``a``.
    """
    a, b = as_tensor(a), as_tensor(b)
    x, y = a.data, b.data
    if x.ndim < 2 or y.ndim < 2:
        raise ShapeError(f"matmul needs at least 2-D operands, got {a.shape} and {b.shape}")
    if x.shape[-1] != y.shape[-2]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} vs {b.shape}")

    if y.ndim == 2:
        k, p = y.shape

        def backward(g):
            grad_a = g @ y.T
            grad_b = x.reshape(-1, k).T @ g.reshape(-1, p)
            return grad_a, grad_b

    elif y.ndim == x.ndim and x.shape[:-2] == y.shape[:-2]:

        def backward(g):
            return g @ np.swapaxes(y, -1, -2), np.swapaxes(x, -1, -2) @ g

    else:
        raise ShapeError(f"matmul: leading axes differ, {a.shape} vs {b.shape}")
    return _result("matmul", x @ y, (a, b), backward)


def linear(x, weight, bias=None) -> Tensor:
    """Affine map over the last axis: x[..., K] @ W[K, P] + b[P]."""
    x, weight = as_tensor(x), as_tensor(weight)
    xv, w = x.data, weight.data
    if w.ndim != 2 or xv.shape[-1] != w.shape[0]:
        raise ShapeError(f"linear: input {x.shape} does not match weight {weight.shape}")
    k, p = w.shape
    value = xv @ w
    if bias is None:
        def backward(g):
            return g @ w.T, xv.reshape(-1, k).T @ g.reshape(-1, p)

        return _result("linear", value, (x, weight), backward)

    bias = as_tensor(bias)
    if bias.shape != (p,):
        raise ShapeError(f"linear: bias {bias.shape} does not match output width {p}")

    def backward_bias(g):
        g2 = g.reshape(-1, p)
        return g @ w.T, xv.reshape(-1, k).T @ g2, g2.sum(axis=0)

    return _result("linear", value + bias.data, (x, weight, bias), backward_bias)


def transpose(x, axes: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    axes = tuple(axes)
    if sorted(axes) != list(range(x.ndim)):
        raise ShapeError(f"transpose: axes {axes} invalid for shape {x.shape}")
    inverse = tuple(np.argsort(axes))
    return _result("transpose", np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inverse),))


def reshape(x, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    shape = tuple(shape)
    if int(np.prod(shape)) != x.size:
        raise ShapeError(f"reshape: cannot view {x.shape} as {shape}")
    original = x.shape
    return _result("reshape", x.data.reshape(shape), (x,), lambda g: (g.reshape(original),))


def broadcast_to(x, shape: Sequence[int]) -> Tensor:
    """Expand singleton axes; the rank must already match."""
    x = as_tensor(x)
    shape = tuple(shape)
    if len(shape) != x.ndim or any(s != t and s != 1 for s, t in zip(x.shape, shape)):
        raise ShapeError(f"broadcast_to: cannot expand {x.shape} to {shape}")
    expanded = tuple(i for i, (s, t) in enumerate(zip(x.shape, shape)) if s == 1 and t != 1)

    def backward(g):
        return (g.sum(axis=expanded, keepdims=True) if expanded else g,)

    return _result("broadcast_to", np.broadcast_to(x.data, shape), (x,), backward)


def embedding(table, ids) -> Tensor:
    """Gather rows of a 2-D table by integer ids."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    if table.ndim != 2:
        raise ShapeError(f"embedding: table must be 2-D, got {table.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ShapeError(f"embedding: ids out of range [0, {table.shape[0]})")
    rows = table.data

    def backward(g):
        grad = np.zeros_like(rows)
        np.add.at(grad, ids, g)
        return (grad,)

    return _result("embedding", rows[ids], (table,), backward)


# ============================================================
# Row-wise maps
# ============================================================

def row_l2_normalize(z, eps: float = NORM_EPS) -> Tensor:
    """Unit-normalize each row of the last axis; rows with norm < eps pass through."""
    z = as_tensor(z)
    x = z.data
    norms = np.sqrt(np.sum(x * x, axis=-1, keepdims=True))
    unit = norms >= eps
    safe = np.where(unit, norms, 1.0).astype(x.dtype)
    y = np.where(unit, x / safe, x)

    def backward(g):
        radial = np.sum(g * y, axis=-1, keepdims=True)
        return (np.where(unit, (g - y * radial) / safe, g),)

    return _result("row_l2_normalize", y, (z,), backward)


def row_softmax(logits, temperature: float = 1.0) -> Tensor:
    """Softmax over the last axis of logits / temperature."""
    logits = as_tensor(logits)
    if not temperature > 0:
        raise ShapeError(f"row_softmax: temperature must be positive, got {temperature}")
    tau = float(temperature)
    z = logits.data / tau
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        return (y * (g - np.sum(g * y, axis=-1, keepdims=True)) / tau,)

    return _result("row_softmax", y, (logits,), backward)


def activation(x, kind: str) -> Tensor:
    """Elementwise silu, gelu (tanh approximation) or tanh."""
    x = as_tensor(x)
    v = x.data
    if kind == "silu":
        s = np.exp(-np.logaddexp(0.0, -v)).astype(v.dtype)
        y = v * s
        dy = s * (1.0 + v * (1.0 - s))
    elif kind == "gelu":
        th = np.tanh(_GELU_K * (v + _GELU_C * v ** 3))
        y = 0.5 * v * (1.0 + th)
        dy = 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * _GELU_K * (1.0 + 3.0 * _GELU_C * v * v)
    elif kind == "tanh":
        y = np.tanh(v)
        dy = 1.0 - y * y
    else:
        raise ShapeError(f"Unknown activation: {kind}. Available kinds: ['silu', 'gelu', 'tanh']")
    return _result(kind, y, (x,), lambda g: (g * dy,))


def silu(x) -> Tensor:
    return activation(x, "silu")


def gelu(x) -> Tensor:
    return activation(x, "gelu")


def tanh(x) -> Tensor:
    return activation(x, "tanh")


def layer_norm(x, gain, bias, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then scale and shift."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    d = x.shape[-1] if x.ndim else 0
    if d < 2:
        raise ShapeError(f"layer_norm needs a last axis of at least 2, got {x.shape}")
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(f"layer_norm: gain {gain.shape} / bias {bias.shape} must be ({d},)")
    v, gamma = x.data, gain.data
    centred = v - v.mean(axis=-1, keepdims=True)
    var = (centred * centred).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centred * inv
    lead = tuple(range(v.ndim - 1))

    def backward(g):
        g_xhat = g * gamma
        grad_x = inv * (
            g_xhat
            - g_xhat.mean(axis=-1, keepdims=True)
            - xhat * (g_xhat * xhat).mean(axis=-1, keepdims=True)
        )
        return grad_x, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return _result("layer_norm", xhat * gamma + bias.data, (x, gain, bias), backward)


def log(x, floor: float = LOG_FLOOR) -> Tensor:
    """Natural log with inputs floored at ``floor``; no gradient below the floor."""
    x = as_tensor(x)
    v = x.data
    clipped = np.maximum(v, floor)

    def backward(g):
        return (np.where(v > floor, g / clipped, 0.0).astype(g.dtype),)

    return _result("log", np.log(clipped), (x,), backward)


# ============================================================
# Reductions and masking
# ============================================================

def _normalize_axes(axes: Axes, ndim: int) -> Tuple[int, ...]:
    if axes is None:
        return tuple(range(ndim))
    if isinstance(axes, (int, np.integer)):
        axes = (int(axes),)
    normalized = []
    for axis in axes:
        if not -ndim <= axis < ndim:
            raise ShapeError(f"reduce: axis {axis} invalid for rank {ndim}")
        normalized.append(axis % ndim)
    if len(set(normalized)) != len(normalized):
        raise ShapeError(f"reduce: repeated axes {tuple(axes)}")
    return tuple(sorted(normalized))


def reduce(x, kind: str, axes: Axes = None) -> Tensor:
    """Sum or mean over ``axes`` (all axes when None)."""
    x = as_tensor(x)
    if kind not in ("sum", "mean"):
        raise ShapeError(f"Unknown reduce kind: {kind}. Available kinds: ['sum', 'mean']")
    dims = _normalize_axes(axes, x.ndim)
    count = int(np.prod([x.shape[a] for a in dims])) if dims else 1
    value = x.data.sum(axis=dims) if kind == "sum" else x.data.mean(axis=dims)
    shape = x.shape

    def backward(g):
        spread = np.array(np.broadcast_to(np.expand_dims(g, dims), shape))
        return (spread / count if kind == "mean" else spread,)

    return _result(f"reduce_{kind}", value, (x,), backward)


def sum(x, axes: Axes = None) -> Tensor:  # noqa: A001 - mirrors numpy naming
    return reduce(x, "sum", axes)


def mean(x, axes: Axes = None) -> Tensor:
    return reduce(x, "mean", axes)


def extract_offdiagonal(s) -> Tensor:
    """Drop the diagonal of the trailing N×N block, giving N×(N−1) in column order."""
    s = as_tensor(s)
    if s.ndim < 2 or s.shape[-1] != s.shape[-2]:
        raise ShapeError(f"extract_offdiagonal needs a square trailing block, got {s.shape}")
    n = s.shape[-1]
    if n < 2:
        raise ShapeError(f"extract_offdiagonal needs N >= 2, got N={n}")
    mask = ~np.eye(n, dtype=bool)
    lead = s.shape[:-2]
    value = s.data[..., mask].reshape(lead + (n, n - 1))

    def backward(g):
        full = np.zeros(s.shape, dtype=g.dtype)
        full[..., mask] = g.reshape(lead + (n * (n - 1),))
        return (full,)

    return _result("extract_offdiagonal", value, (s,), backward)


def detach(x) -> Tensor:
    return as_tensor(x).detach()

"""Dense tensor with reverse-mode gradient accumulation.

The carrier type for node features, weights, and activations throughout the
package. Values are stored as a flat row-major float buffer (float32 for
forward/training, float64 for oracle and gradient checks); each differentiable
operation records a backward closure so that ``Tensor.backward()`` accumulates
gradients into every reachable leaf.

Scope is deliberately narrow: the only broadcasting is scalar-with-tensor
(plus explicit row-vector helpers), reductions remove their axis, and there is
no graph optimization, fusion, or device support. Max reductions route the
gradient to the lowest index among maximal entries so every subgradient choice
is deterministic and testable.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import erf as _erf_f64

from .errors import (
    DimensionError,
    EmptyReductionError,
    NonFiniteError,
)

# Names of every differentiable operation exposed by this module. Gradient
# certification (tests) must cover each entry.
DIFFERENTIABLE_OPS = [
    "add",
    "sub",
    "mul",
    "scale",
    "add_scalar",
    "erf",
    "max0",
    "reciprocal",
    "matmul",
    "reduce_sum",
    "reduce_mean",
    "reduce_max",
    "sum_all",
    "concat",
    "narrow",
    "gather_rows",
    "reshape",
    "permute",
    "mul_rowvec",
    "add_rowvec",
    "layer_norm",
    "softmax_cross_entropy",
    "offset_mix",
]

_FLOAT_DTYPES = (np.float32, np.float64)
_INV_SQRT_PI = 1.0 / np.sqrt(np.pi)


class Tensor:
    """n-dimensional value array with an accumulated-gradient slot.

    ``data`` is a C-contiguous numpy array (the flat row-major buffer plus
    shape metadata). ``grad``, when present, always matches ``data``'s shape.
    Stored scalars must be finite; leaf construction checks this and raises
    :class:`NonFiniteError` otherwise.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(np.float32)
        arr = np.ascontiguousarray(arr)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("tensor constructed with NaN/Inf entries")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self.op = "leaf"

    # -- constructors ------------------------------------------------------

    @staticmethod
    def zeros(shape, dtype=np.float32, requires_grad: bool = False) -> "Tensor":
        return Tensor(np.zeros(shape, dtype=dtype), requires_grad=requires_grad)

    @staticmethod
    def _from_op(data: np.ndarray, parents: tuple["Tensor", ...], op: str) -> "Tensor":
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        out.requires_grad = any(p.requires_grad for p in parents)
        out._parents = parents if out.requires_grad else ()
        out._backward = None
        out.op = op
        return out

    # -- metadata ----------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        if self.size != 1:
            raise DimensionError(f"item() on tensor of {self.size} elements")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        out = Tensor.__new__(Tensor)
        out.data = self.data
        out.grad = None
        out.requires_grad = False
        out._parents = ()
        out._backward = None
        out.op = "detach"
        return out

    def astype(self, dtype) -> "Tensor":
        return Tensor(self.data.astype(dtype), requires_grad=self.requires_grad)

    def assert_finite(self, where: str = "tensor") -> "Tensor":
        if not np.all(np.isfinite(self.data)):
            raise NonFiniteError(f"non-finite values in {where}")
        return self

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype.name}, op={self.op})"

    # -- autograd ----------------------------------------------------------

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def _accumulate_row(self, row: int, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad[row] += g

    def backward(self, seed: np.ndarray | None = None) -> None:
        """Reverse-mode sweep from this tensor.

        ``seed`` defaults to ones and must match this tensor's shape; calling
        without a seed on a non-scalar is almost always a bug, so the default
        is only intended for scalar losses.
        """
        if seed is None:
            seed = np.ones_like(self.data)
        else:
            seed = np.asarray(seed, dtype=self.data.dtype)
            if seed.shape != self.data.shape:
                raise DimensionError("backward seed shape mismatch")

        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in visited:
                    stack.append((p, False))

        self._accumulate(seed)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operator sugar ----------------------------------------------------

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return sub(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        return mul(self, other)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)


# ---------------------------------------------------------------------------
# shape/broadcast helpers
# ---------------------------------------------------------------------------


def _is_scalar_shaped(t: Tensor) -> bool:
    return t.size == 1


def _binary_shapes(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape == b.shape:
        return
    if _is_scalar_shaped(a) or _is_scalar_shaped(b):
        return
    raise DimensionError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def _reduce_to(g: np.ndarray, like: Tensor) -> np.ndarray:
    # Collapse a full-shape gradient back onto a scalar-shaped operand.
    if g.shape == like.shape:
        return g
    return np.sum(g).reshape(like.shape).astype(like.data.dtype)


def _set_backward(out: Tensor, fn: Callable[[np.ndarray], None]) -> None:
    if out.requires_grad:
        out._backward = fn


# ---------------------------------------------------------------------------
# elementwise operations
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    _binary_shapes(a, b, "add")
    out = Tensor._from_op(a.data + b.data, (a, b), "add")

    def bw(g: np.ndarray) -> None:
        if a.requires_grad:
            a._accumulate(_reduce_to(g, a))
        if b.requires_grad:
            b._accumulate(_reduce_to(g, b))

    _set_backward(out, bw)
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    _binary_shapes(a, b, "sub")
    out = Tensor._from_op(a.data - b.data, (a, b), "sub")

    def bw(g: np.ndarray) -> None:
        if a.requires_grad:
            a._accumulate(_reduce_to(g, a))
        if b.requires_grad:
            b._accumulate(_reduce_to(-g, b))

    _set_backward(out, bw)
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    _binary_shapes(a, b, "mul")
    out = Tensor._from_op(a.data * b.data, (a, b), "mul")

    def bw(g: np.ndarray) -> None:
        if a.requires_grad:
            a._accumulate(_reduce_to(g * b.data, a))
        if b.requires_grad:
            b._accumulate(_reduce_to(g * a.data, b))

    _set_backward(out, bw)
    return out


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)
    out = Tensor._from_op(a.data * np.asarray(s, dtype=a.data.dtype), (a,), "scale")

    def bw(g: np.ndarray) -> None:
        a._accumulate(g * np.asarray(s, dtype=a.data.dtype))

    _set_backward(out, bw)
    return out


def add_scalar(a: Tensor, s: float) -> Tensor:
    s = float(s)
    out = Tensor._from_op(a.data + np.asarray(s, dtype=a.data.dtype), (a,), "add_scalar")

    def bw(g: np.ndarray) -> None:
        a._accumulate(g)

    _set_backward(out, bw)
    return out


def erf(a: Tensor) -> Tensor:
    """Gauss error function, elementwise; accurate to well under 1e-7 abs."""
    out = Tensor._from_op(_erf_f64(a.data.astype(np.float64)).astype(a.data.dtype), (a,), "erf")

    def bw(g: np.ndarray) -> None:
        d = 2.0 * _INV_SQRT_PI * np.exp(-a.data.astype(np.float64) ** 2)
        a._accumulate(g * d.astype(a.data.dtype))

    _set_backward(out, bw)
    return out


def max0(a: Tensor) -> Tensor:
    """ReLU: zero-or-identity mapping. Subgradient at 0 is 0."""
    out = Tensor._from_op(np.maximum(a.data, 0), (a,), "max0")

    def bw(g: np.ndarray) -> None:
        a._accumulate(g * (a.data > 0))

    _set_backward(out, bw)
    return out


def reciprocal(a: Tensor) -> Tensor:
    out = Tensor._from_op(1.0 / a.data, (a,), "reciprocal")

    def bw(g: np.ndarray) -> None:
        a._accumulate(-g / (a.data * a.data))

    _set_backward(out, bw)
    return out


_ELEMENTWISE = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "scale": scale,
    "erf": erf,
    "max0": max0,
}


def elementwise(op: str, *args) -> Tensor:
    """Dispatch an elementwise operation by name (add/sub/mul/scale/erf/max0)."""
    if op not in _ELEMENTWISE:
        raise KeyError(f"unknown elementwise op {op!r}")
    return _ELEMENTWISE[op](*args)


# ---------------------------------------------------------------------------
# matmul
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of two rank-2 tensors; d a = g b^T, d b = a^T g."""
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise DimensionError("matmul requires rank-2 operands")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(
            f"matmul inner extents differ: {a.shape} x {b.shape}"
        )
    out = Tensor._from_op(a.data @ b.data, (a, b), "matmul")

    def bw(g: np.ndarray) -> None:
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    _set_backward(out, bw)
    return out


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------


def _check_axis(x: Tensor, axis: int) -> int:
    if not (-x.data.ndim <= axis < x.data.ndim):
        raise DimensionError(f"axis {axis} out of range for rank {x.data.ndim}")
    axis = axis % x.data.ndim
    if x.shape[axis] == 0:
        raise EmptyReductionError(f"reduction over empty axis {axis}")
    return axis


def reduce_sum(x: Tensor, axis: int) -> Tensor:
    axis = _check_axis(x, axis)
    out = Tensor._from_op(np.sum(x.data, axis=axis), (x,), "reduce_sum")

    def bw(g: np.ndarray) -> None:
        x._accumulate(np.broadcast_to(np.expand_dims(g, axis), x.shape).copy())

    _set_backward(out, bw)
    return out


def reduce_mean(x: Tensor, axis: int) -> Tensor:
    axis = _check_axis(x, axis)
    n = x.shape[axis]
    out = Tensor._from_op(np.mean(x.data, axis=axis), (x,), "reduce_mean")

    def bw(g: np.ndarray) -> None:
        x._accumulate(np.broadcast_to(np.expand_dims(g / n, axis), x.shape).copy())

    _set_backward(out, bw)
    return out


def reduce_max(x: Tensor, axis: int) -> Tensor:
    """Max along ``axis``; ties route the gradient to the lowest index."""
    axis = _check_axis(x, axis)
    winners = np.argmax(x.data, axis=axis)  # argmax returns the first maximum
    out = Tensor._from_op(np.max(x.data, axis=axis), (x,), "reduce_max")

    def bw(g: np.ndarray) -> None:
        dx = np.zeros_like(x.data)
        np.put_along_axis(
            dx, np.expand_dims(winners, axis), np.expand_dims(g, axis), axis
        )
        x._accumulate(dx)

    _set_backward(out, bw)
    return out


_REDUCERS = {"max": reduce_max, "mean": reduce_mean, "sum": reduce_sum}


def reduce(x: Tensor, axis: int, mode: str) -> Tensor:
    """Dispatch a reduction by mode name (max/mean/sum); removes ``axis``."""
    if mode not in _REDUCERS:
        raise KeyError(f"unknown reduction mode {mode!r}")
    return _REDUCERS[mode](x, axis)


def sum_all(x: Tensor) -> Tensor:
    out = Tensor._from_op(np.asarray(np.sum(x.data), dtype=x.data.dtype), (x,), "sum_all")

    def bw(g: np.ndarray) -> None:
        x._accumulate(np.full_like(x.data, float(g)))

    _set_backward(out, bw)
    return out


# ---------------------------------------------------------------------------
# shape surgery
# ---------------------------------------------------------------------------


def concat(parts: Sequence[Tensor], axis: int) -> Tensor:
    """Concatenate along ``axis``; the gradient splits by segment."""
    parts = list(parts)
    if not parts:
        raise DimensionError("concat of zero parts")
    rank = parts[0].data.ndim
    if not (-rank <= axis < rank):
        raise DimensionError(f"axis {axis} out of range for rank {rank}")
    axis = axis % rank
    ref = list(parts[0].shape)
    for p in parts[1:]:
        s = list(p.shape)
        if len(s) != rank or s[:axis] + s[axis + 1 :] != ref[:axis] + ref[axis + 1 :]:
            raise DimensionError(
                f"concat extents off axis {axis} differ: {parts[0].shape} vs {p.shape}"
            )
    out = Tensor._from_op(
        np.concatenate([p.data for p in parts], axis=axis), tuple(parts), "concat"
    )
    sizes = [p.shape[axis] for p in parts]

    def bw(g: np.ndarray) -> None:
        start = 0
        for p, width in zip(parts, sizes):
            if p.requires_grad:
                sl = [slice(None)] * rank
                sl[axis] = slice(start, start + width)
                p._accumulate(g[tuple(sl)])
            start += width

    _set_backward(out, bw)
    return out


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice along ``axis``; the gradient zero-pads outside it."""
    rank = x.data.ndim
    if not (-rank <= axis < rank):
        raise DimensionError(f"axis {axis} out of range for rank {rank}")
    axis = axis % rank
    if start < 0 or length < 0 or start + length > x.shape[axis]:
        raise DimensionError(
            f"narrow [{start}:{start + length}] outside extent {x.shape[axis]}"
        )
    sl = [slice(None)] * rank
    sl[axis] = slice(start, start + length)
    out = Tensor._from_op(np.ascontiguousarray(x.data[tuple(sl)]), (x,), "narrow")

    def bw(g: np.ndarray) -> None:
        dx = np.zeros_like(x.data)
        dx[tuple(sl)] = g
        x._accumulate(dx)

    _set_backward(out, bw)
    return out


def split(x: Tensor, axis: int, sizes: Iterable[int]) -> list[Tensor]:
    """Partition ``x`` along ``axis`` into consecutive pieces of ``sizes``."""
    sizes = list(sizes)
    if sum(sizes) != x.shape[axis % x.data.ndim]:
        raise DimensionError(f"split sizes {sizes} do not cover extent")
    pieces = []
    start = 0
    for width in sizes:
        pieces.append(narrow(x, axis, start, width))
        start += width
    return pieces


def gather_rows(x: Tensor, row_idx: np.ndarray) -> Tensor:
    """Index rows of a rank-2 tensor: out[..., :] = x[row_idx[...], :].

    ``row_idx`` may have any shape; the result has shape
    ``row_idx.shape + (x.shape[1],)``. Duplicate indices accumulate their
    gradients, which is what makes this double as an explicit broadcast.
    """
    if x.data.ndim != 2:
        raise DimensionError("gather_rows requires a rank-2 source")
    idx = np.asarray(row_idx)
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[0]):
        raise DimensionError("gather_rows index out of range")
    out = Tensor._from_op(x.data[idx], (x,), "gather_rows")
    flat_idx = idx.reshape(-1)

    def bw(g: np.ndarray) -> None:
        dx = np.zeros_like(x.data)
        np.add.at(dx, flat_idx, g.reshape(-1, x.shape[1]))
        x._accumulate(dx)

    _set_backward(out, bw)
    return out


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape)) != x.size:
        raise DimensionError(f"cannot reshape {x.shape} to {shape}")
    out = Tensor._from_op(x.data.reshape(shape), (x,), "reshape")

    def bw(g: np.ndarray) -> None:
        x._accumulate(g.reshape(x.shape))

    _set_backward(out, bw)
    return out


def permute(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(int(a) for a in axes)
    if sorted(axes) != list(range(x.data.ndim)):
        raise DimensionError(f"permute axes {axes} invalid for rank {x.data.ndim}")
    inv = np.argsort(axes)
    out = Tensor._from_op(np.ascontiguousarray(x.data.transpose(axes)), (x,), "permute")

    def bw(g: np.ndarray) -> None:
        x._accumulate(np.ascontiguousarray(g.transpose(inv)))

    _set_backward(out, bw)
    return out


# ---------------------------------------------------------------------------
# row-vector broadcasts (per-channel scale/shift over leading axes)
# ---------------------------------------------------------------------------


def mul_rowvec(x: Tensor, v: Tensor) -> Tensor:
    """Multiply every row of ``x`` by the vector ``v`` (shape = last extent)."""
    if v.data.ndim != 1 or v.shape[0] != x.shape[-1]:
        raise DimensionError(f"mul_rowvec: {v.shape} does not match last extent of {x.shape}")
    out = Tensor._from_op(x.data * v.data, (x, v), "mul_rowvec")

    def bw(g: np.ndarray) -> None:
        if x.requires_grad:
            x._accumulate(g * v.data)
        if v.requires_grad:
            v._accumulate((g * x.data).reshape(-1, v.shape[0]).sum(axis=0))

    _set_backward(out, bw)
    return out


def add_rowvec(x: Tensor, v: Tensor) -> Tensor:
    """Add the vector ``v`` to every row of ``x``."""
    if v.data.ndim != 1 or v.shape[0] != x.shape[-1]:
        raise DimensionError(f"add_rowvec: {v.shape} does not match last extent of {x.shape}")
    out = Tensor._from_op(x.data + v.data, (x, v), "add_rowvec")

    def bw(g: np.ndarray) -> None:
        if x.requires_grad:
            x._accumulate(g)
        if v.requires_grad:
            v._accumulate(g.reshape(-1, v.shape[0]).sum(axis=0))

    _set_backward(out, bw)
    return out


# ---------------------------------------------------------------------------
# fused operations
# ---------------------------------------------------------------------------


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-row normalization over the last axis with learnable scale/shift.

    Each row (node) is normalized over its channel vector independently of
    every other row, so the result does not depend on batch composition.
    """
    c = x.shape[-1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise DimensionError("layer_norm scale/shift must match channel extent")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + np.asarray(eps, dtype=x.data.dtype))
    xhat = xc * inv
    out = Tensor._from_op(xhat * gamma.data + beta.data, (x, gamma, beta), "layer_norm")

    def bw(g: np.ndarray) -> None:
        if gamma.requires_grad:
            gamma._accumulate((g * xhat).reshape(-1, c).sum(axis=0))
        if beta.requires_grad:
            beta._accumulate(g.reshape(-1, c).sum(axis=0))
        if x.requires_grad:
            gh = g * gamma.data
            m1 = gh.mean(axis=-1, keepdims=True)
            m2 = (gh * xhat).mean(axis=-1, keepdims=True)
            x._accumulate((gh - m1 - xhat * m2) * inv)

    _set_backward(out, bw)
    return out


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean softmax cross-entropy of rank-2 logits against integer labels."""
    if logits.data.ndim != 2:
        raise DimensionError("softmax_cross_entropy requires rank-2 logits")
    labels = np.asarray(labels, dtype=np.int64)
    n, k = logits.shape
    if labels.shape != (n,):
        raise DimensionError("label count does not match logit rows")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise DimensionError("label id outside logit width")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    ez = np.exp(z)
    probs = ez / ez.sum(axis=1, keepdims=True)
    nll = -(z[np.arange(n), labels] - np.log(ez.sum(axis=1)))
    out = Tensor._from_op(np.asarray(nll.mean(), dtype=logits.data.dtype), (logits,), "softmax_cross_entropy")

    def bw(g: np.ndarray) -> None:
        d = probs.copy()
        d[np.arange(n), labels] -= 1.0
        logits._accumulate(d * (float(g) / n))

    _set_backward(out, bw)
    return out


def offset_mix(
    x: Tensor,
    weights: Tensor,
    maps: Sequence[tuple[np.ndarray, np.ndarray]],
    bias: Tensor | None = None,
) -> Tensor:
    """Weighted per-channel scatter over precomputed (dst, src) index pairs.

    ``maps[o]`` lists the destination and source rows linked by offset ``o``;
    ``weights[o]`` is the per-channel coefficient of that offset. Computes

        y[d, c] = sum_o weights[o, c] * x[s, c] (+ bias[o, c])

    over all pairs (d, s) in ``maps[o]``. Rows never listed as a destination
    stay zero. Source indices within one offset must be unique (they are for
    grid shifts), which keeps the backward pass a plain fancy-indexed add.
    """
    n_off = weights.shape[0]
    if len(maps) != n_off:
        raise DimensionError("offset_mix: one (dst, src) map required per offset")
    if x.data.ndim != 2 or weights.shape[1] != x.shape[1]:
        raise DimensionError("offset_mix: weights must be [offsets, channels]")
    if bias is not None and bias.shape != weights.shape:
        raise DimensionError("offset_mix: bias must match weights shape")
    y = np.zeros_like(x.data)
    for o, (dst, src) in enumerate(maps):
        if len(dst) == 0:
            continue
        contrib = weights.data[o] * x.data[src]
        if bias is not None:
            contrib = contrib + bias.data[o]
        y[dst] += contrib
    parents = (x, weights) if bias is None else (x, weights, bias)
    out = Tensor._from_op(y, parents, "offset_mix")

    def bw(g: np.ndarray) -> None:
        dx = np.zeros_like(x.data) if x.requires_grad else None
        for o, (dst, src) in enumerate(maps):
            if len(dst) == 0:
                continue
            gd = g[dst]
            if dx is not None:
                dx[src] += weights.data[o] * gd
            if weights.requires_grad:
                weights._accumulate_row(o, (x.data[src] * gd).sum(axis=0))
            if bias is not None and bias.requires_grad:
                bias._accumulate_row(o, gd.sum(axis=0))
        if dx is not None:
            x._accumulate(dx)

    _set_backward(out, bw)
    return out

"""Reverse-mode automatic differentiation over dense numpy arrays.

Every numeric value flowing through the encoders is a :class:`Tensor`: a
contiguous n-dimensional float array with an optional gradient buffer.
Operations build a dynamic graph as they execute; gradients are obtained by
walking the recorded operations once, in reverse execution order.

Computation defaults to 32-bit floats.  Gradient checks and other
verification code simply pass 64-bit arrays in; all operations preserve the
input precision.  Every forward and backward result is checked for NaN/Inf
(disable with :func:`set_finite_checks` only if profiling shows a need).
"""

from __future__ import annotations

import itertools
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConfigError, NonFiniteError, ShapeError

DEFAULT_DTYPE = np.float32

# tanh-approximation constants for the Gaussian error linear unit
GELU_COEFF = 0.044715
GELU_SCALE = 0.7978845608028654  # sqrt(2 / pi)

# additive mask value: large enough that exp() underflows to exactly 0 after
# max subtraction, small enough to stay finite in 32-bit
MASK_FILL = -1e30

_graph_enabled = True
_finite_checks = True
_op_counter = itertools.count()
_active_tapes: list["GradientTape"] = []


def set_finite_checks(enabled: bool) -> None:
    global _finite_checks
    _finite_checks = bool(enabled)


def _check_finite(name: str, arr: np.ndarray) -> None:
    if _finite_checks and not np.isfinite(arr).all():
        raise NonFiniteError(f"{name} produced a non-finite value")


class no_grad:
    """Context manager that disables graph recording (pure inference)."""

    def __enter__(self):
        global _graph_enabled
        self._prev = _graph_enabled
        _graph_enabled = False
        return self

    def __exit__(self, *exc):
        global _graph_enabled
        _graph_enabled = self._prev
        return False


class OpNode:
    """One recorded operation: output, parents, and the local gradient rule."""

    __slots__ = ("seq", "name", "parents", "grad_fn", "out")

    def __init__(self, name: str, parents: tuple["Tensor", ...],
                 grad_fn: Callable[[np.ndarray], Sequence[np.ndarray | None]],
                 out: "Tensor"):
        self.seq = next(_op_counter)
        self.name = name
        self.parents = parents
        self.grad_fn = grad_fn
        self.out = out


class GradientTape:
    """Explicit record of operations in execution order.

    Any operation executed while the tape is active is appended to
    ``operations``.  :meth:`backward` traverses the record exactly once, in
    reverse execution order, accumulating gradients into every tensor with
    ``requires_grad`` set.
    """

    def __init__(self):
        self.operations: list[OpNode] = []

    def __enter__(self):
        _active_tapes.append(self)
        return self

    def __exit__(self, *exc):
        _active_tapes.remove(self)
        return False

    def backward(self, output: "Tensor", grad: np.ndarray | None = None) -> list[tuple[int, str]]:
        """Run the reverse pass over this tape; returns the visit log."""
        return _run_backward(list(reversed(self.operations)), output, grad)


class Tensor:
    """Dense n-dimensional array with an optional same-shape gradient slot."""

    __slots__ = ("data", "grad", "requires_grad", "_node")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data)
        if arr.dtype.kind != "f":
            arr = arr.astype(dtype or DEFAULT_DTYPE)
        elif dtype is not None:
            arr = arr.astype(dtype)
        # note: np.ascontiguousarray would promote 0-d arrays to shape (1,)
        self.data = arr if arr.flags.c_contiguous else np.ascontiguousarray(arr)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._node: OpNode | None = None

    # -- basic protocol ----------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
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
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}{flag})"

    # -- operator sugar ----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take(self, key)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, axes):
        return transpose(self, axes)

    def backward(self, grad: np.ndarray | None = None) -> list[tuple[int, str]]:
        """Reverse pass from this tensor through every upstream operation."""
        nodes: list[OpNode] = []
        seen: set[int] = set()
        stack: list[Tensor] = [self]
        while stack:
            t = stack.pop()
            node = t._node
            if node is not None and id(node) not in seen:
                seen.add(id(node))
                nodes.append(node)
                stack.extend(node.parents)
        nodes.sort(key=lambda n: n.seq, reverse=True)
        return _run_backward(nodes, self, grad)


def _run_backward(nodes_desc: list[OpNode], output: Tensor,
                  grad: np.ndarray | None) -> list[tuple[int, str]]:
    if grad is None:
        grad = np.ones_like(output.data)
    else:
        grad = np.asarray(grad, dtype=output.data.dtype)
        if grad.shape != output.data.shape:
            raise ShapeError(
                f"seed gradient shape {grad.shape} != output shape {output.data.shape}")
    pending: dict[int, np.ndarray] = {id(output): grad}
    holders: dict[int, Tensor] = {id(output): output}
    if output.requires_grad and output._node is None:
        _accumulate(output, grad)
    visited: list[tuple[int, str]] = []
    for node in nodes_desc:
        visited.append((node.seq, node.name))
        g = pending.pop(id(node.out), None)
        holders.pop(id(node.out), None)
        if g is None:
            continue
        if node.out.requires_grad:
            _accumulate(node.out, g)
        parent_grads = node.grad_fn(g)
        for parent, pg in zip(node.parents, parent_grads):
            if pg is None:
                continue
            _check_finite(f"{node.name} backward", pg)
            key = id(parent)
            if key in pending:
                pending[key] = pending[key] + pg
            else:
                pending[key] = pg
                holders[key] = parent
    # whatever is left belongs to leaves (no producing op)
    for key, g in pending.items():
        leaf = holders[key]
        if leaf.requires_grad and leaf._node is None:
            _accumulate(leaf, g)
    return visited


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = g.astype(t.data.dtype, copy=True)
    else:
        t.grad = t.grad + g.astype(t.data.dtype, copy=False)


def _make(name: str, data: np.ndarray, parents: tuple[Tensor, ...],
          grad_fn: Callable[[np.ndarray], Sequence[np.ndarray | None]]) -> Tensor:
    _check_finite(name, data)
    out = Tensor(data)
    if _graph_enabled and any(p.requires_grad or p._node is not None for p in parents):
        out.requires_grad = any(p.requires_grad for p in parents)
        node = OpNode(name, parents, grad_fn, out)
        out._node = node
        for tape in _active_tapes:
            tape.operations.append(node)
    return out


def as_tensor(value, like: Tensor | None = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    dtype = like.data.dtype if like is not None else DEFAULT_DTYPE
    return Tensor(np.asarray(value, dtype=dtype))


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient over the axes numpy broadcasting introduced."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gd, sd) in enumerate(zip(g.shape, shape)) if sd == 1 and gd != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise arithmetic
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a = as_tensor(a, b if isinstance(b, Tensor) else None)
    b = as_tensor(b, a)
    return _make("add", a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a = as_tensor(a, b if isinstance(b, Tensor) else None)
    b = as_tensor(b, a)
    return _make("sub", a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a = as_tensor(a, b if isinstance(b, Tensor) else None)
    b = as_tensor(b, a)
    return _make("mul", a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape),
                            _unbroadcast(g * a.data, b.shape)))


def div(a, b) -> Tensor:
    a = as_tensor(a, b if isinstance(b, Tensor) else None)
    b = as_tensor(b, a)
    return _make("div", a.data / b.data, (a, b),
                 lambda g: (_unbroadcast(g / b.data, a.shape),
                            _unbroadcast(-g * a.data / (b.data * b.data), b.shape)))


def neg(a: Tensor) -> Tensor:
    return _make("neg", -a.data, (a,), lambda g: (-g,))


def exp(a: Tensor) -> Tensor:
    out_data = np.exp(a.data)
    return _make("exp", out_data, (a,), lambda g: (g * out_data,))


def log(a: Tensor) -> Tensor:
    return _make("log", np.log(a.data), (a,), lambda g: (g / a.data,))


def sqrt(a: Tensor) -> Tensor:
    out_data = np.sqrt(a.data)
    return _make("sqrt", out_data, (a,), lambda g: (g * 0.5 / out_data,))


def tanh(a: Tensor) -> Tensor:
    out_data = np.tanh(a.data)
    return _make("tanh", out_data, (a,), lambda g: (g * (1.0 - out_data * out_data),))


def gelu(a: Tensor) -> Tensor:
    """Gaussian error linear unit, tanh approximation.

    gelu(x) = 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).  The tanh form
    is used so results are bit-reproducible across platforms.
    """
    x = a.data
    inner = GELU_SCALE * (x + GELU_COEFF * x ** 3)
    t = np.tanh(inner)
    out_data = 0.5 * x * (1.0 + t)

    def grad_fn(g):
        sech2 = 1.0 - t * t
        d_inner = GELU_SCALE * (1.0 + 3.0 * GELU_COEFF * x * x)
        return (g * (0.5 * (1.0 + t) + 0.5 * x * sech2 * d_inner),)

    return _make("gelu", out_data, (a,), grad_fn)


def dropout(a: Tensor, p: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; call only on the training path."""
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {p}")
    if p == 0.0:
        return a
    mask = (rng.random(a.shape) >= p).astype(a.data.dtype) / (1.0 - p)
    return _make("dropout", a.data * mask, (a,), lambda g: (g * mask,))


# ---------------------------------------------------------------------------
# shape manipulation
# ---------------------------------------------------------------------------

def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    old = a.shape
    return _make("reshape", a.data.reshape(shape), (a,),
                 lambda g: (g.reshape(old),))


def transpose(a: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return _make("transpose", np.ascontiguousarray(a.data.transpose(axes)), (a,),
                 lambda g: (g.transpose(inverse),))


def moveaxis(a: Tensor, source: int, dest: int) -> Tensor:
    perm = list(range(a.ndim))
    perm.insert(dest % a.ndim, perm.pop(source % a.ndim))
    return transpose(a, perm)


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    tensors = list(tensors)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def grad_fn(g):
        return tuple(np.ascontiguousarray(p) for p in np.split(g, splits, axis=axis))

    return _make("concat", np.concatenate([t.data for t in tensors], axis=axis),
                 tuple(tensors), grad_fn)


def take(a: Tensor, key) -> Tensor:
    """Basic indexing (ints, slices, tuples); gradient scatter-adds back."""
    out_data = a.data[key]

    def grad_fn(g):
        full = np.zeros_like(a.data)
        np.add.at(full, key, g)
        return (full,)

    return _make("take", np.ascontiguousarray(out_data), (a,), grad_fn)


def broadcast_to(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    shape = tuple(shape)
    return _make("broadcast_to", np.ascontiguousarray(np.broadcast_to(a.data, shape)),
                 (a,), lambda g: (_unbroadcast(g, a.shape),))


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------

def _normalize_axes(axis, ndim) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(ax % ndim for ax in axis)


def _expand_reduced(g: np.ndarray, shape: tuple[int, ...], axes: tuple[int, ...],
                    keepdims: bool) -> np.ndarray:
    if not keepdims:
        for ax in sorted(axes):
            g = np.expand_dims(g, ax)
    return np.broadcast_to(g, shape)


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axis, a.ndim)
    return _make("sum", a.data.sum(axis=axes, keepdims=keepdims), (a,),
                 lambda g: (_expand_reduced(g, a.shape, axes, keepdims).astype(a.data.dtype),))


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axis, a.ndim)
    count = int(np.prod([a.shape[ax] for ax in axes]))
    return _make("mean", a.data.mean(axis=axes, keepdims=keepdims), (a,),
                 lambda g: (_expand_reduced(g, a.shape, axes, keepdims) / count,))


def max_pool_over_axis(a: Tensor, axis: int) -> Tensor:
    """Elementwise maximum along ``axis``.

    The gradient routes to the argmax position only; ties break to the
    lowest index so repeated runs are bit-identical.
    """
    axis = axis % a.ndim
    if a.shape[axis] < 1:
        raise ShapeError(f"cannot max-pool over empty axis {axis} of shape {a.shape}")
    argmax = np.argmax(a.data, axis=axis)  # first occurrence on ties

    def grad_fn(g):
        full = np.zeros_like(a.data)
        np.put_along_axis(full, np.expand_dims(argmax, axis),
                          np.expand_dims(g, axis), axis)
        return (full,)

    return _make("max_pool", a.data.max(axis=axis), (a,), grad_fn)


# ---------------------------------------------------------------------------
# linear algebra and neural-network primitives
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product with numpy-style batch broadcasting on leading axes."""
    a = as_tensor(a, b if isinstance(b, Tensor) else None)
    b = as_tensor(b, a)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs 2-d operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} x {b.shape}")

    def grad_fn(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return (_unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape))

    return _make("matmul", np.matmul(a.data, b.data), (a, b), grad_fn)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Numerically stabilized softmax along ``axis`` (max subtraction)."""
    axis = axis % a.ndim
    if a.shape[axis] < 1:
        raise ShapeError(f"cannot softmax over empty axis {axis} of shape {a.shape}")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)

    def grad_fn(g):
        dot = (g * s).sum(axis=axis, keepdims=True)
        return (s * (g - dot),)

    return _make("softmax", s, (a,), grad_fn)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(
            f"layer_norm gain/bias must have shape ({d},), got {gain.shape} and {bias.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out_data = xhat * gain.data + bias.data

    def grad_fn(g):
        lead = tuple(range(g.ndim - 1))
        dgain = (g * xhat).sum(axis=lead)
        dbias = g.sum(axis=lead)
        dxhat = g * gain.data
        dx = inv * (dxhat
                    - dxhat.mean(axis=-1, keepdims=True)
                    - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
        return (dx, dgain, dbias)

    return _make("layer_norm", out_data, (x, gain, bias), grad_fn)


def embedding_lookup(table: Tensor, indices) -> Tensor:
    """Gather rows of ``table``; the gradient scatter-adds into those rows."""
    idx = np.asarray(indices)
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        bad = int(idx.min()) if idx.min() < 0 else int(idx.max())
        raise IndexError(
            f"embedding index {bad} out of range for table with {table.shape[0]} rows")

    def grad_fn(g):
        full = np.zeros_like(table.data)
        np.add.at(full, idx, g)
        return (full,)

    return _make("embedding", table.data[idx], (table,), grad_fn)


def conv2d(x: Tensor, w: Tensor, stride: tuple[int, int]) -> Tensor:
    """Batched 2-d convolution, zero 'same' padding, ceil-mode striding.

    x: (N, C, H, W); w: (Cout, C, kh, kw) with odd kh, kw.
    Output: (N, Cout, ceil(H/sh), ceil(W/sw)).
    """
    sh, sw = stride
    n, c, h, wd = x.shape
    cout, cin, kh, kw = w.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ConfigError(f"conv2d kernel sizes must be odd, got {kh}x{kw}")
    if cin != c:
        raise ShapeError(f"conv2d channel mismatch: input {c}, kernel {cin}")
    if h < 1 or wd < 1:
        raise ShapeError(f"conv2d input too small: {x.shape}")
    hp, wp = -(-h // sh), -(-wd // sw)
    ph, pw = kh // 2, kw // 2
    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    acc = np.zeros((n, hp, wp, cout), dtype=x.data.dtype)
    for di in range(kh):
        for dj in range(kw):
            seg = xp[:, :, di:di + (hp - 1) * sh + 1:sh, dj:dj + (wp - 1) * sw + 1:sw]
            acc += np.einsum("nchw,oc->nhwo", seg, w.data[:, :, di, dj])
    out_data = np.ascontiguousarray(acc.transpose(0, 3, 1, 2))

    def grad_fn(g):
        gt = g.transpose(0, 2, 3, 1)
        gw = np.zeros_like(w.data)
        gxp = np.zeros_like(xp)
        for di in range(kh):
            for dj in range(kw):
                seg = xp[:, :, di:di + (hp - 1) * sh + 1:sh, dj:dj + (wp - 1) * sw + 1:sw]
                gw[:, :, di, dj] = np.einsum("nhwo,nchw->oc", gt, seg)
                gxp[:, :, di:di + (hp - 1) * sh + 1:sh, dj:dj + (wp - 1) * sw + 1:sw] += \
                    np.einsum("nhwo,oc->nchw", gt, w.data[:, :, di, dj])
        gx = gxp[:, :, ph:ph + h, pw:pw + wd]
        return (np.ascontiguousarray(gx), gw)

    return _make("conv2d", out_data, (x, w), grad_fn)


def conv1d_time(x: Tensor, w: Tensor, stride: int) -> Tensor:
    """Temporal 1-d convolution across frames, mixing channels.

    x: (B, T, C, H, W); w: (Cout, C, kt) with odd kt.
    Output: (B, ceil(T/stride), Cout, H, W).
    """
    b, t, c, h, wd = x.shape
    cout, cin, kt = w.shape
    if kt % 2 == 0:
        raise ConfigError(f"conv1d_time kernel size must be odd, got {kt}")
    if cin != c:
        raise ShapeError(f"conv1d_time channel mismatch: input {c}, kernel {cin}")
    if t < 1:
        raise ShapeError(f"conv1d_time input has no frames: {x.shape}")
    k = -(-t // stride)
    pt = kt // 2
    xp = np.pad(x.data, ((0, 0), (pt, pt), (0, 0), (0, 0), (0, 0)))
    out_data = np.zeros((b, k, cout, h, wd), dtype=x.data.dtype)
    for dt in range(kt):
        seg = xp[:, dt:dt + (k - 1) * stride + 1:stride]
        out_data += np.einsum("bkchw,oc->bkohw", seg, w.data[:, :, dt])

    def grad_fn(g):
        gw = np.zeros_like(w.data)
        gxp = np.zeros_like(xp)
        for dt in range(kt):
            seg = xp[:, dt:dt + (k - 1) * stride + 1:stride]
            gw[:, :, dt] = np.einsum("bkohw,bkchw->oc", g, seg)
            gxp[:, dt:dt + (k - 1) * stride + 1:stride] += \
                np.einsum("bkohw,oc->bkchw", g, w.data[:, :, dt])
        gx = gxp[:, pt:pt + t]
        return (np.ascontiguousarray(gx), gw)

    return _make("conv1d_time", out_data, (x, w), grad_fn)


def separable_conv3d(clip: Tensor, spatial_kernel: Tensor, temporal_kernel: Tensor,
                     stride: tuple[int, int, int]) -> Tensor:
    """Factorized 3-d convolution: 2-d spatial pass, then 1-d temporal pass.

    clip: (T, C, H, W) or (B, T, C, H, W); spatial_kernel: (Cmid, C, kh, kw);
    temporal_kernel: (Cout, Cmid, kt); stride: (time, height, width).
    Equivalent to one dense 3-d convolution whose kernel is the outer product
    of the two factors.
    """
    st, sh, sw = stride
    squeeze = clip.ndim == 4
    if squeeze:
        clip = reshape(clip, (1, *clip.shape))
    b, t, c, h, wd = clip.shape
    kh, kw = spatial_kernel.shape[-2:]
    kt = temporal_kernel.shape[-1]
    if kh > h + 2 * (kh // 2) or kw > wd + 2 * (kw // 2) or kt > t + 2 * (kt // 2):
        raise ShapeError(
            f"kernel ({kt}x{kh}x{kw}) larger than padded input ({t}x{h}x{wd})")
    flat = reshape(clip, (b * t, c, h, wd))
    mid = conv2d(flat, spatial_kernel, (sh, sw))
    _, cmid, hp, wp = mid.shape
    mid = reshape(mid, (b, t, cmid, hp, wp))
    out = conv1d_time(mid, temporal_kernel, st)
    if squeeze:
        out = reshape(out, out.shape[1:])
    return out

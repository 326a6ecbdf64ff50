"""Minimal reverse-mode automatic differentiation over numpy arrays.

Every differentiable operation records its parents and a closure that maps the
output gradient to one gradient per parent.  :func:`backward` walks the graph
in reverse topological order and accumulates gradients into the ``grad`` field
of leaf tensors created with ``requires_grad=True``.

Binary operations accept operands of identical shape, a 0-d (scalar) operand,
or an operand whose shape equals the other's shape without its leading batch
axis.  Anything else raises :class:`DimensionError`; use :func:`broadcast_to`
when a wider broadcast is intended.
"""

from __future__ import annotations

import itertools
import hashlib
from contextlib import contextmanager
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "DimensionError",
    "ContractError",
    "tensor",
    "no_grad",
    "is_grad_enabled",
    "activation_patterns",
    "record_pattern",
    "backward",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "relu",
    "exp",
    "log",
    "sqrt",
    "square",
    "sum",
    "mean",
    "max",
    "reshape",
    "broadcast_to",
    "concat",
    "slice_axis",
    "concat_channels",
    "slice_channels",
    "unstack2",
    "matmul",
    "conv2d",
    "maxpool2d",
    "cross_entropy",
]

_ids = itertools.count()
_grad_enabled = True


class DimensionError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class ContractError(ValueError):
    """A documented precondition of an operation was violated."""


@contextmanager
def no_grad():
    """Disable graph construction inside the block."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


_pattern_log: Optional[list] = None


@contextmanager
def activation_patterns():
    """Record a digest of every ReLU mask and max-type selection made inside the block.

    Two forward passes with equal digests took the same branch at every
    non-smooth op, so a finite difference between them estimates a true
    derivative.
    """
    global _pattern_log
    prev = _pattern_log
    _pattern_log = []
    try:
        yield _pattern_log
    finally:
        _pattern_log = prev


def record_pattern(arr: np.ndarray) -> None:
    if _pattern_log is not None:
        _pattern_log.append(hashlib.blake2b(np.ascontiguousarray(arr).tobytes(), digest_size=8).digest())


def is_grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """A node in the computation graph holding a float32 or float64 array."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "id", "name")

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: Optional[str] = None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32 if dtype is None else dtype)
        self.data: np.ndarray = arr
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple = ()
        self._backward: Optional[Callable] = None
        self.id = next(_ids)
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        rg = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{rg})"

    __array_priority__ = 1000

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

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def sum(self, axis=None, keepdims=False):
        return sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)


def tensor(data, requires_grad: bool = False, dtype=np.float32) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, dtype=dtype)


def _as_tensor(x, like: Optional[Tensor] = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else np.float32
    return Tensor(np.asarray(x, dtype=dtype))


def _make(data: np.ndarray, parents: Sequence[Tensor], backward_fn: Callable) -> Tensor:
    out = Tensor(data, dtype=data.dtype)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every leaf reachable from the scalar ``loss``.

    Leaf gradients accumulate, so call ``zero_grad`` between optimisation
    steps.  Leaves not reachable from ``loss`` are left untouched.
    """
    if loss.size != 1:
        raise ContractError(f"backward() needs a single-element loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return

    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if node.id in seen:
            continue
        seen.add(node.id)
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and p.id not in seen:
                stack.append((p, False))

    grads: dict[int, np.ndarray] = {loss.id: np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(node.id, None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            if parent.id in grads:
                grads[parent.id] = grads[parent.id] + pg
            else:
                grads[parent.id] = pg


# --------------------------------------------------------------------------
# elementwise


def _check_binary(a: Tensor, b: Tensor, op: str) -> None:
    sa, sb = a.shape, b.shape
    if sa == sb or a.ndim == 0 or b.ndim == 0:
        return
    if sa[1:] == sb or sb[1:] == sa:
        return
    raise DimensionError(f"{op}: shapes {sa} and {sb} are not compatible (only batch-axis broadcasting)")


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    if len(shape) == 0:
        return np.asarray(g.sum(), dtype=g.dtype)
    return g.sum(axis=0)


def add(a, b) -> Tensor:
    a, b = (_as_tensor(a, b if isinstance(b, Tensor) else None), _as_tensor(b, a if isinstance(a, Tensor) else None))
    _check_binary(a, b, "add")
    sa, sb = a.shape, b.shape
    return _make(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = (_as_tensor(a, b if isinstance(b, Tensor) else None), _as_tensor(b, a if isinstance(a, Tensor) else None))
    _check_binary(a, b, "sub")
    sa, sb = a.shape, b.shape
    return _make(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b) -> Tensor:
    a, b = (_as_tensor(a, b if isinstance(b, Tensor) else None), _as_tensor(b, a if isinstance(a, Tensor) else None))
    _check_binary(a, b, "mul")
    ad, bd = a.data, b.data

    def bw(g):
        return (
            _unbroadcast(g * bd, ad.shape) if a.requires_grad else None,
            _unbroadcast(g * ad, bd.shape) if b.requires_grad else None,
        )

    return _make(ad * bd, (a, b), bw)


def div(a, b) -> Tensor:
    a, b = (_as_tensor(a, b if isinstance(b, Tensor) else None), _as_tensor(b, a if isinstance(a, Tensor) else None))
    _check_binary(a, b, "div")
    ad, bd = a.data, b.data
    out = ad / bd

    def bw(g):
        return (
            _unbroadcast(g / bd, ad.shape) if a.requires_grad else None,
            _unbroadcast(-g * out / bd, bd.shape) if b.requires_grad else None,
        )

    return _make(out, (a, b), bw)


def neg(a: Tensor) -> Tensor:
    return _make(-a.data, (a,), lambda g: (-g,))


def relu(a: Tensor) -> Tensor:
    # subgradient at 0 is 0
    mask = a.data > 0
    record_pattern(mask)
    return _make(np.where(mask, a.data, 0).astype(a.dtype), (a,), lambda g: (g * mask,))


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    ad = a.data
    return _make(np.log(ad), (a,), lambda g: (g / ad,))


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)
    return _make(out, (a,), lambda g: (g / (2 * out),))


def square(a: Tensor) -> Tensor:
    ad = a.data
    return _make(ad * ad, (a,), lambda g: (2 * g * ad,))


# --------------------------------------------------------------------------
# reductions


def _norm_axis(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(ax % ndim for ax in axis))


def sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    axes = _norm_axis(axis, a.ndim)
    shape = a.shape
    out = a.data.sum(axis=axes, keepdims=keepdims)

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, shape).copy(),)

    return _make(np.asarray(out, dtype=a.dtype), (a,), bw)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _norm_axis(axis, a.ndim)
    count = int(np.prod([a.shape[ax] for ax in axes])) if axes else 1
    shape = a.shape
    out = a.data.mean(axis=axes, keepdims=keepdims)

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g / count, shape).copy(),)

    return _make(np.asarray(out, dtype=a.dtype), (a,), bw)


def max(a: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    """Maximum along one axis (or all); ties send the gradient to the first index."""
    if axis is None:
        flat = a.data.reshape(-1)
        idx = int(np.argmax(flat))
        record_pattern(np.array(idx))
        shape = a.shape
        out = flat[idx].reshape((1,) * a.ndim if keepdims else ())

        def bw_all(g):
            full = np.zeros(flat.shape, dtype=a.dtype)
            full[idx] = g.reshape(-1)[0]
            return (full.reshape(shape),)

        return _make(np.asarray(out, dtype=a.dtype), (a,), bw_all)

    axis = axis % a.ndim
    idx = np.argmax(a.data, axis=axis)
    record_pattern(idx)
    idx_k = np.expand_dims(idx, axis)
    out = np.take_along_axis(a.data, idx_k, axis=axis)
    if not keepdims:
        out = np.squeeze(out, axis)

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        full = np.zeros_like(a.data)
        np.put_along_axis(full, idx_k, g, axis=axis)
        return (full,)

    return _make(out, (a,), bw)


# --------------------------------------------------------------------------
# shape ops


def reshape(a: Tensor, shape) -> Tensor:
    old = a.shape
    out = a.data.reshape(shape)
    return _make(out, (a,), lambda g: (g.reshape(old),))


def broadcast_to(a: Tensor, shape) -> Tensor:
    """Explicit numpy-style broadcast; the gradient is summed back."""
    shape = tuple(shape)
    src = a.shape
    try:
        out = np.broadcast_to(a.data, shape)
    except ValueError as exc:
        raise DimensionError(f"broadcast_to: cannot broadcast {src} to {shape}") from exc
    lead = len(shape) - len(src)
    red = tuple(range(lead)) + tuple(i + lead for i, n in enumerate(src) if n == 1 and shape[i + lead] != 1)

    def bw(g):
        g = g.sum(axis=red, keepdims=True) if red else g
        return (g.reshape(src),)

    return _make(out, (a,), bw)


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    if not tensors:
        raise DimensionError("concat: empty tensor list")
    nd = tensors[0].ndim
    axis = axis % nd
    for t in tensors[1:]:
        if t.ndim != nd or any(t.shape[i] != tensors[0].shape[i] for i in range(nd) if i != axis):
            raise DimensionError(f"concat: shapes {[x.shape for x in tensors]} differ off axis {axis}")
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)
    out = np.concatenate([t.data for t in tensors], axis=axis)

    def bw(g):
        return tuple(
            np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis) for i in range(len(tensors))
        )

    return _make(out, tuple(tensors), bw)


def slice_axis(a: Tensor, start: int, stop: int, axis: int = 1) -> Tensor:
    axis = axis % a.ndim
    n = a.shape[axis]
    if not (0 <= start < stop <= n):
        raise DimensionError(f"slice_axis: [{start}:{stop}] out of range for axis {axis} of size {n}")
    sl = [slice(None)] * a.ndim
    sl[axis] = slice(start, stop)
    sl = tuple(sl)

    def bw(g):
        full = np.zeros_like(a.data)
        full[sl] = g
        return (full,)

    return _make(a.data[sl], (a,), bw)


def concat_channels(tensors: Sequence[Tensor]) -> Tensor:
    return concat(tensors, axis=1)


def slice_channels(a: Tensor, start: int, stop: int) -> Tensor:
    return slice_axis(a, start, stop, axis=1)


def unstack2(a: Tensor) -> tuple[Tensor, Tensor]:
    """Split a tensor with leading axis of size 2 into its two halves."""
    if a.ndim == 0 or a.shape[0] != 2:
        raise DimensionError(f"unstack2: leading axis must have size 2, got {a.shape}")

    def part(i):
        def bw(g):
            full = np.zeros_like(a.data)
            full[i] = g
            return (full,)

        return _make(a.data[i], (a,), bw)

    return part(0), part(1)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    ad, bd = a.data, b.data

    def bw(g):
        return (g @ bd.T if a.requires_grad else None, ad.T @ g if b.requires_grad else None)

    return _make(ad @ bd, (a, b), bw)


# --------------------------------------------------------------------------
# convolution and pooling


def conv_output_size(size: int, k: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - k) // stride + 1


def _check_conv(xshape, wshape, groups, stride, padding):
    if len(xshape) != 4:
        raise DimensionError(f"conv2d: input must be [N,C,H,W], got {xshape}")
    if len(wshape) != 4:
        raise DimensionError(f"conv2d: weight must be [O,C/g,k,k], got {wshape}")
    n, c, h, w = xshape
    o, cg, kh, kw = wshape
    if groups < 1 or stride < 1 or padding < 0:
        raise ContractError(f"conv2d: groups={groups}, stride={stride}, padding={padding} invalid")
    if kh != kw:
        raise DimensionError(f"conv2d: weight axes 2,3 (kernel) must be square, got {kh}x{kw}")
    if c % groups:
        raise DimensionError(f"conv2d: input axis 1 (channels={c}) not divisible by groups={groups}")
    if o % groups:
        raise DimensionError(f"conv2d: weight axis 0 (out channels={o}) not divisible by groups={groups}")
    if cg != c // groups:
        raise DimensionError(
            f"conv2d: weight axis 1 ({cg} in-channels per group) must equal input axis 1 / groups ({c}/{groups}={c // groups})"
        )
    if kh > h + 2 * padding or kw > w + 2 * padding:
        raise DimensionError(f"conv2d: kernel {kh} exceeds padded input axes 2,3 ({h}+2*{padding}, {w}+2*{padding})")
    return n, c, h, w, o, cg, kh


def im2col(x: np.ndarray, k: int, stride: int, padding: int, groups: int) -> np.ndarray:
    """Unfold [N,C,H,W] into [groups, N*Ho*Wo, k*k*C/groups].

    A 5-d input [P,N,C,H,W] is unfolded jointly into
    [groups, N*Ho*Wo, k*k*P*C/groups].  The last axis is ordered
    (kernel row, kernel col, part, channel) so every copy moves contiguous runs.
    """
    xs = x[None] if x.ndim == 4 else x
    p_, n, c, h, w = xs.shape
    ho = conv_output_size(h, k, stride, padding)
    wo = conv_output_size(w, k, stride, padding)
    cg = c // groups
    # channels-last copy: [g, N, Hp, Wp, P, Cg]
    src = np.zeros((groups, n, h + 2 * padding, w + 2 * padding, p_, cg), dtype=x.dtype)
    src[:, :, padding : padding + h, padding : padding + w] = xs.reshape(p_, n, groups, cg, h, w).transpose(2, 1, 4, 5, 0, 3)
    if k == 1 and stride == 1:
        return src.reshape(groups, n * ho * wo, p_ * cg)
    out = np.empty((groups, n, ho, wo, k, k, p_, cg), dtype=x.dtype)
    hs, ws = (ho - 1) * stride + 1, (wo - 1) * stride + 1
    for i in range(k):
        for j in range(k):
            out[:, :, :, :, i, j] = src[:, :, i : i + hs : stride, j : j + ws : stride]
    return out.reshape(groups, n * ho * wo, k * k * p_ * cg)


def col2im(dcols: np.ndarray, xshape: tuple, k: int, stride: int, padding: int, groups: int, parts: int = 0) -> np.ndarray:
    """Adjoint of :func:`im2col`; ``parts`` > 0 returns [parts,N,C,H,W]."""
    n, c, h, w = xshape
    p_ = parts or 1
    ho = conv_output_size(h, k, stride, padding)
    wo = conv_output_size(w, k, stride, padding)
    cg = c // groups
    hp, wp = h + 2 * padding, w + 2 * padding
    d = dcols.reshape(groups, n, ho, wo, k, k, p_, cg)
    if k == 1 and stride == 1:
        dx = d[:, :, :, :, 0, 0]
    else:
        dx = np.zeros((groups, n, hp, wp, p_, cg), dtype=dcols.dtype)
        hs, ws = (ho - 1) * stride + 1, (wo - 1) * stride + 1
        for i in range(k):
            for j in range(k):
                dx[:, :, i : i + hs : stride, j : j + ws : stride] += d[:, :, :, :, i, j]
        dx = dx[:, :, padding : padding + h, padding : padding + w]
    dx = np.ascontiguousarray(dx.transpose(4, 1, 0, 5, 2, 3)).reshape(p_, n, c, h, w)
    return dx if parts else dx[0]


def _kernel_matrix(weight: np.ndarray, groups: int) -> np.ndarray:
    """[O, Cg, k, k] -> [groups, k*k*Cg, O/groups] matching the im2col axis order."""
    o, cg, k, _ = weight.shape
    return weight.reshape(groups, o // groups, cg, k, k).transpose(0, 3, 4, 2, 1).reshape(groups, k * k * cg, o // groups)


def _kernel_unmatrix(mat: np.ndarray, wshape: tuple) -> np.ndarray:
    o, cg, k, _ = wshape
    groups = mat.shape[0]
    return mat.reshape(groups, k, k, cg, o // groups).transpose(0, 4, 3, 1, 2).reshape(wshape)


def conv2d(x: Tensor, weight: Tensor, groups: int = 1, stride: int = 1, padding: int = 0) -> Tensor:
    """Grouped 2-d cross-correlation without bias."""
    n, c, h, w, o, cg, k = _check_conv(x.shape, weight.shape, groups, stride, padding)
    ho = conv_output_size(h, k, stride, padding)
    wo = conv_output_size(w, k, stride, padding)
    og = o // groups
    cols = im2col(x.data, k, stride, padding, groups)
    wmat = _kernel_matrix(weight.data, groups)
    out = np.matmul(cols, wmat)
    out = out.reshape(groups, n, ho, wo, og).transpose(1, 0, 4, 2, 3).reshape(n, o, ho, wo)
    xshape, wshape = x.shape, weight.shape

    def bw(g):
        gm = g.reshape(n, groups, og, ho, wo).transpose(1, 0, 3, 4, 2).reshape(groups, n * ho * wo, og)
        dw = _kernel_unmatrix(np.matmul(cols.transpose(0, 2, 1), gm), wshape) if weight.requires_grad else None
        dx = col2im(np.matmul(gm, wmat.transpose(0, 2, 1)), xshape, k, stride, padding, groups) if x.requires_grad else None
        return dx, dw

    return _make(np.ascontiguousarray(out), (x, weight), bw)


def pool_windows(a: np.ndarray, window: int) -> np.ndarray:
    """View [N,C,H,W] as [N,C,H/w,W/w,w*w] (copying)."""
    n, c, h, w = a.shape
    if h % window or w % window:
        raise ContractError(f"pooling: spatial size {h}x{w} not divisible by window {window}")
    ho, wo = h // window, w // window
    return a.reshape(n, c, ho, window, wo, window).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho, wo, window * window)


def unpool_windows(g: np.ndarray, shape: tuple, window: int) -> np.ndarray:
    n, c, h, w = shape
    ho, wo = h // window, w // window
    return g.reshape(n, c, ho, wo, window, window).transpose(0, 1, 2, 4, 3, 5).reshape(shape)


def maxpool2d(x: Tensor, window: int) -> Tensor:
    """Non-overlapping max pooling; ties resolve to the lowest index in the window."""
    if x.ndim != 4:
        raise DimensionError(f"maxpool2d: input must be [N,C,H,W], got {x.shape}")
    win = pool_windows(x.data, window)
    idx = np.argmax(win, axis=-1)[..., None]
    record_pattern(idx)
    out = np.take_along_axis(win, idx, axis=-1)[..., 0]
    shape = x.shape

    def bw(g):
        full = np.zeros(win.shape, dtype=g.dtype)
        np.put_along_axis(full, idx, g[..., None], axis=-1)
        return (unpool_windows(full, shape, window),)

    return _make(out, (x,), bw)


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean softmax cross-entropy of ``logits`` [N,K] against integer ``labels``."""
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise DimensionError(f"cross_entropy: logits {logits.shape} vs labels {labels.shape}")
    z = logits.data
    zmax = z.max(axis=1, keepdims=True)
    e = np.exp(z - zmax)
    ssum = e.sum(axis=1, keepdims=True)
    logp = z - zmax - np.log(ssum)
    n = z.shape[0]
    loss = -logp[np.arange(n), labels].mean()

    def bw(g):
        p = e / ssum
        p[np.arange(n), labels] -= 1
        return (p * (g / n),)

    return _make(np.asarray(loss, dtype=z.dtype), (logits,), bw)

"""Complex tensors as pairs of real autodiff tensors.

Gradients are those of the underlying real graph (the C = R^2 view), so every
complex operation can be checked against real finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import ContractError, DimensionError, Tensor

__all__ = [
    "ComplexTensor",
    "ComplexScalar",
    "complex_scale",
    "complex_conv2d",
    "complex_conv2d_reference",
    "conj_mul",
    "magnitude",
    "magnitude_squared",
    "phase",
    "eq_maxpool",
    "EPS_MAG",
]

EPS_MAG = 1e-12


@dataclass(frozen=True)
class ComplexScalar:
    re: float
    im: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.re) and np.isfinite(self.im)):
            raise ContractError(f"ComplexScalar components must be finite, got ({self.re}, {self.im})")

    @classmethod
    def from_complex(cls, z: complex) -> "ComplexScalar":
        z = complex(z)
        return cls(z.real, z.imag)

    @classmethod
    def polar(cls, r: float, theta: float) -> "ComplexScalar":
        return cls(r * np.cos(theta), r * np.sin(theta))

    def __complex__(self) -> complex:
        return complex(self.re, self.im)

    def __abs__(self) -> float:
        return float(np.hypot(self.re, self.im))


class ComplexTensor:
    """Real and imaginary parts held as two same-shape :class:`Tensor` nodes."""

    __slots__ = ("re", "im")

    def __init__(self, re, im=None):
        if not isinstance(re, Tensor):
            re = Tensor(re)
        if im is None:
            im = Tensor(np.zeros_like(re.data))
        elif not isinstance(im, Tensor):
            im = Tensor(im, dtype=re.dtype)
        if re.shape != im.shape:
            raise DimensionError(f"ComplexTensor: re shape {re.shape} != im shape {im.shape}")
        self.re = re
        self.im = im

    @classmethod
    def from_numpy(cls, z: np.ndarray, dtype=np.float32, requires_grad: bool = False) -> "ComplexTensor":
        z = np.asarray(z)
        return cls(
            Tensor(z.real.astype(dtype), requires_grad=requires_grad),
            Tensor(np.imag(z).astype(dtype), requires_grad=requires_grad),
        )

    def numpy(self) -> np.ndarray:
        return self.re.data + 1j * self.im.data

    @property
    def shape(self) -> tuple:
        return self.re.shape

    @property
    def dtype(self):
        return self.re.dtype

    def __add__(self, other: "ComplexTensor") -> "ComplexTensor":
        return ComplexTensor(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "ComplexTensor") -> "ComplexTensor":
        return ComplexTensor(self.re - other.re, self.im - other.im)

    def __repr__(self) -> str:
        return f"ComplexTensor(shape={self.shape}, dtype={self.dtype})"


def _as_scalar(s) -> ComplexScalar:
    if isinstance(s, ComplexScalar):
        return s
    return ComplexScalar.from_complex(s)


def complex_scale(x: ComplexTensor, s) -> ComplexTensor:
    """Multiply every element of ``x`` by the complex scalar ``s``."""
    s = _as_scalar(s)
    a, b = s.re, s.im
    if b == 0.0:
        return ComplexTensor(x.re * a, x.im * a)
    re = x.re * a - x.im * b
    im = x.im * a + x.re * b
    return ComplexTensor(re, im)


def complex_conv2d(x: ComplexTensor, w: ComplexTensor, groups: int = 1, stride: int = 1, padding: int = 0) -> ComplexTensor:
    """Complex grouped convolution with no bias.

    Both components are unfolded once and multiplied against the real block
    matrix [[Wr, Wi], [-Wi, Wr]], which yields the real and imaginary outputs
    in a single batched matmul.
    """
    n, c, h, wd, o, cg, k = T._check_conv(x.shape, w.shape, groups, stride, padding)
    ho = T.conv_output_size(h, k, stride, padding)
    wo = T.conv_output_size(wd, k, stride, padding)
    og = o // groups
    kk = cg * k * k
    cols = T.im2col(np.stack([x.re.data, x.im.data]), k, stride, padding, groups)
    # rows ordered (ki, kj, part, channel); columns (re out, im out)
    wr = T._kernel_matrix(w.re.data, groups).reshape(groups, k * k, 1, cg, og)
    wi = T._kernel_matrix(w.im.data, groups).reshape(groups, k * k, 1, cg, og)
    top = np.concatenate([wr, wi], axis=4)
    bottom = np.concatenate([-wi, wr], axis=4)
    big = np.concatenate([top, bottom], axis=2).reshape(groups, 2 * kk, 2 * og)
    out = np.matmul(cols, big)  # [g, M, 2*og]
    packed = out.reshape(groups, n, ho, wo, 2, og).transpose(4, 1, 0, 5, 2, 3).reshape(2, n, o, ho, wo)
    xshape, wshape = x.shape, w.shape
    x_grad = x.re.requires_grad or x.im.requires_grad
    w_grad = w.re.requires_grad or w.im.requires_grad

    def bw(g):
        gm = g.reshape(2, n, groups, og, ho, wo).transpose(2, 1, 4, 5, 0, 3).reshape(groups, n * ho * wo, 2 * og)
        dwr = dwi = dxr = dxi = None
        if w_grad:
            dbig = np.matmul(cols.transpose(0, 2, 1), gm).reshape(groups, k * k, 2, cg, 2, og)
            dwr_m = dbig[:, :, 0, :, 0] + dbig[:, :, 1, :, 1]
            dwi_m = dbig[:, :, 0, :, 1] - dbig[:, :, 1, :, 0]
            dwr = T._kernel_unmatrix(dwr_m.reshape(groups, kk, og), wshape)
            dwi = T._kernel_unmatrix(dwi_m.reshape(groups, kk, og), wshape)
        if x_grad:
            dcols = np.matmul(gm, big.transpose(0, 2, 1))
            dxr, dxi = T.col2im(dcols, xshape, k, stride, padding, groups, parts=2)
        return dxr, dxi, dwr, dwi

    node = T._make(np.ascontiguousarray(packed), (x.re, x.im, w.re, w.im), bw)
    return ComplexTensor(*T.unstack2(node))


def complex_conv2d_reference(
    x: ComplexTensor, w: ComplexTensor, groups: int = 1, stride: int = 1, padding: int = 0
) -> ComplexTensor:
    """The same map composed from four real convolutions; used as a cross-check."""
    rr = T.conv2d(x.re, w.re, groups, stride, padding)
    ii = T.conv2d(x.im, w.im, groups, stride, padding)
    ri = T.conv2d(x.re, w.im, groups, stride, padding)
    ir = T.conv2d(x.im, w.re, groups, stride, padding)
    return ComplexTensor(rr - ii, ri + ir)


def conj_mul(x: ComplexTensor, y: ComplexTensor) -> ComplexTensor:
    """Elementwise x * conj(y)."""
    if x.shape != y.shape:
        raise DimensionError(f"conj_mul: shapes {x.shape} and {y.shape} differ")
    re = x.re * y.re + x.im * y.im
    im = x.im * y.re - x.re * y.im
    return ComplexTensor(re, im)


def magnitude_squared(x: ComplexTensor) -> Tensor:
    return T.square(x.re) + T.square(x.im)


def magnitude(x: ComplexTensor, eps: float = EPS_MAG) -> Tensor:
    return T.sqrt(magnitude_squared(x) + eps)


def phase(x: ComplexTensor) -> Tensor:
    """atan2(im, re), with atan2(0, 0) = 0 and gradient 0 at the origin."""
    re, im = x.re.data, x.im.data
    out = np.arctan2(im, re)
    r2 = re * re + im * im
    safe = np.where(r2 > 0, r2, 1)
    inv = np.where(r2 > 0, 1 / safe, 0).astype(re.dtype)

    def bw(g):
        return -g * im * inv, g * re * inv

    return T._make(out.astype(re.dtype), (x.re, x.im), bw)


def eq_maxpool(x: ComplexTensor, window: int) -> ComplexTensor:
    """Per window, keep the complex element of largest magnitude (first index on ties)."""
    if len(x.shape) != 4:
        raise DimensionError(f"eq_maxpool: input must be [N,C,H,W], got {x.shape}")
    wr = T.pool_windows(x.re.data, window)
    wi = T.pool_windows(x.im.data, window)
    idx = np.argmax(wr * wr + wi * wi, axis=-1)[..., None]
    T.record_pattern(idx)
    out_r = np.take_along_axis(wr, idx, axis=-1)[..., 0]
    out_i = np.take_along_axis(wi, idx, axis=-1)[..., 0]
    shape = x.shape

    def bw(g):
        res = []
        for part in g:
            full = np.zeros(wr.shape, dtype=g.dtype)
            np.put_along_axis(full, idx, part[..., None], axis=-1)
            res.append(T.unpool_windows(full, shape, window))
        return tuple(res)

    node = T._make(np.stack([out_r, out_i]), (x.re, x.im), bw)
    return ComplexTensor(*T.unstack2(node))

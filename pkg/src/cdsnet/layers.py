"""Co-domain symmetric layers.

Each layer has a known response to multiplying its input by a complex scalar
``s``: Econv and EqMaxPool are equivariant (output scales by ``s``), the
conjugate layer maps ``s`` to ``|s|**2``, CReLU is positively homogeneous and
ComplexBatchNorm (batch statistics) removes any positive scale while
preserving phase.  Chaining them gives a network whose logits are invariant
to ``s``.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from . import tensor as T
from .complex import ComplexTensor, complex_conv2d, conj_mul, eq_maxpool, magnitude_squared
from .nn import Module, Parameter, uniform_init
from .tensor import DimensionError, Tensor

__all__ = [
    "Econv",
    "ConjugateLayer",
    "ComplexBatchNorm",
    "CReLU",
    "EqMaxPool",
    "ResBlock",
    "ComplexHead",
    "crelu",
]


def _complex_weight(rng, shape, fan_in, dtype):
    bound = 1.0 / np.sqrt(2.0 * fan_in)
    return (
        Parameter(uniform_init(rng, shape, bound, dtype), dtype),
        Parameter(uniform_init(rng, shape, bound, dtype), dtype),
    )


class Econv(Module):
    """Complex convolution without bias, so econv(s*x) == s*econv(x).

    ``test_bias`` adds a constant complex offset to every output. It exists
    only so the verification suite can demonstrate that it catches a broken
    equivariance law; it is not a parameter.
    """

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int = 3,
        groups: int = 1,
        stride: int = 1,
        padding: Optional[int] = None,
        rng: Optional[np.random.Generator] = None,
        dtype=np.float32,
        test_bias: Optional[complex] = None,
    ):
        super().__init__()
        if in_channels % groups or out_channels % groups:
            raise DimensionError(f"Econv: channels {in_channels}->{out_channels} not divisible by groups={groups}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_channels, self.out_channels = in_channels, out_channels
        self.kernel_size, self.groups, self.stride = kernel_size, groups, stride
        self.padding = kernel_size // 2 if padding is None else padding
        shape = (out_channels, in_channels // groups, kernel_size, kernel_size)
        self.weight_re, self.weight_im = _complex_weight(rng, shape, shape[1] * kernel_size**2, dtype)
        self.test_bias = test_bias

    @property
    def weight(self) -> ComplexTensor:
        return ComplexTensor(self.weight_re, self.weight_im)

    def forward(self, x: ComplexTensor) -> ComplexTensor:
        if len(x.shape) != 4 or x.shape[1] != self.in_channels:
            raise DimensionError(f"Econv expects [N,{self.in_channels},H,W], got {x.shape}")
        out = complex_conv2d(x, self.weight, self.groups, self.stride, self.padding)
        if self.test_bias is not None:
            b = complex(self.test_bias)
            out = ComplexTensor(out.re + b.real, out.im + b.imag)
        return out

    def extra_repr(self):
        return f"{self.in_channels}, {self.out_channels}, k={self.kernel_size}, g={self.groups}"


class ConjugateLayer(Module):
    """out = x * conj(econv_1x1(x)); scaling the input by s scales the output by |s|^2."""

    def __init__(self, channels: int, rng=None, dtype=np.float32):
        super().__init__()
        self.channels = channels
        self.pairing = Econv(channels, channels, kernel_size=1, padding=0, rng=rng, dtype=dtype)

    def forward(self, x: ComplexTensor) -> ComplexTensor:
        if len(x.shape) != 4 or x.shape[1] != self.channels:
            raise DimensionError(f"ConjugateLayer expects [N,{self.channels},H,W], got {x.shape}")
        return conj_mul(x, self.pairing(x))

    def extra_repr(self):
        return str(self.channels)


EPS_FLOOR = 1e-30


class ComplexBatchNorm(Module):
    """Radial normalization: divide each channel by its RMS magnitude.

    out_c = gain_c * x_c / sqrt(ms_c + eps * mean(ms)), where ms_c is the mean
    squared magnitude of channel c.  Scaling ``eps`` by the across-channel
    mean keeps the layer exactly invariant to a positive input scale; with
    ``relative_eps=False`` the plain ``ms_c + eps`` form is used instead,
    which is only invariant while ``eps`` is negligible next to ``ms_c``.

    The learnable gain is stored as a log so it stays positive; there is no
    additive shift.
    """

    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5, relative_eps: bool = True, dtype=np.float32):
        super().__init__()
        self.channels, self.momentum, self.eps = channels, momentum, eps
        self.relative_eps = relative_eps
        self.log_gain = Parameter(np.zeros(channels), dtype)
        self.register_buffer("running_ms", np.ones(channels, dtype=dtype))

    @property
    def gain(self) -> np.ndarray:
        return np.exp(self.log_gain.data)

    def _denominator(self, ms: Tensor) -> Tensor:
        if not self.relative_eps:
            return T.sqrt(ms + self.eps)
        ref = T.mean(ms, axis=0)
        return T.sqrt(ms + T.broadcast_to(ref * self.eps + EPS_FLOOR, ms.shape))

    def forward(self, x: ComplexTensor) -> ComplexTensor:
        c = self.channels
        if len(x.shape) != 4 or x.shape[1] != c:
            raise DimensionError(f"ComplexBatchNorm({c}) got input {x.shape}")
        if self.mode.statistics == "batch":
            ms = T.mean(magnitude_squared(x), axis=(0, 2, 3))
            if self.mode.updates_running:
                m = self.momentum
                self._buffers["running_ms"] = ((1 - m) * self._buffers["running_ms"] + m * ms.data).astype(x.dtype)
            denom = self._denominator(ms)
        else:
            denom = self._denominator(Tensor(self._buffers["running_ms"], dtype=x.dtype))
        scale = T.exp(self.log_gain) / denom
        scale = T.broadcast_to(T.reshape(scale, (c, 1, 1)), x.shape[1:])
        return ComplexTensor(x.re * scale, x.im * scale)

    def extra_repr(self):
        return str(self.channels)


def crelu(x: ComplexTensor) -> ComplexTensor:
    return ComplexTensor(T.relu(x.re), T.relu(x.im))


class CReLU(Module):
    def forward(self, x: ComplexTensor) -> ComplexTensor:
        return crelu(x)


class EqMaxPool(Module):
    def __init__(self, window: int):
        super().__init__()
        self.window = window

    def forward(self, x: ComplexTensor) -> ComplexTensor:
        return eq_maxpool(x, self.window)

    def extra_repr(self):
        return str(self.window)


class ResBlock(Module):
    """x + CBN(Econv(CReLU(CBN(Econv(x))))) with an identity skip.

    ``hidden`` sets the inner width; by default it equals ``channels``.
    """

    def __init__(self, channels: int, groups: int, hidden: Optional[int] = None, rng=None, dtype=np.float32):
        super().__init__()
        hidden = channels if hidden is None else hidden
        if hidden % groups:
            raise DimensionError(f"ResBlock: hidden width {hidden} not divisible by groups={groups}")
        self.channels, self.groups, self.hidden = channels, groups, hidden
        self.conv1 = Econv(channels, hidden, 3, groups=groups, rng=rng, dtype=dtype)
        self.bn1 = ComplexBatchNorm(hidden, dtype=dtype)
        self.conv2 = Econv(hidden, channels, 3, groups=groups, rng=rng, dtype=dtype)
        self.bn2 = ComplexBatchNorm(channels, dtype=dtype)

    def forward(self, x: ComplexTensor) -> ComplexTensor:
        if len(x.shape) != 4 or x.shape[1] != self.channels:
            raise DimensionError(f"ResBlock({self.channels}) got input {x.shape}")
        h = crelu(self.bn1(self.conv1(x)))
        return x + self.bn2(self.conv2(h))

    def extra_repr(self):
        return f"{self.channels}, groups={self.groups}, hidden={self.hidden}"


class ComplexHead(Module):
    """[N,C,1,1] complex -> concat(re, im) [N,2C] -> affine -> [N,K] real logits."""

    def __init__(self, in_channels: int, num_classes: int, rng=None, dtype=np.float32):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_channels, self.num_classes = in_channels, num_classes
        bound = 1.0 / np.sqrt(2 * in_channels)
        self.weight = Parameter(uniform_init(rng, (2 * in_channels, num_classes), bound, dtype), dtype)
        self.bias = Parameter(uniform_init(rng, (num_classes,), bound, dtype), dtype)

    def forward(self, x: ComplexTensor) -> Tensor:
        n, c = x.shape[0], self.in_channels
        if tuple(x.shape[1:]) != (c, 1, 1):
            raise DimensionError(f"ComplexHead expects [N,{c},1,1], got {x.shape}")
        feats = T.concat([T.reshape(x.re, (n, c)), T.reshape(x.im, (n, c))], axis=1)
        return T.matmul(feats, self.weight) + self.bias

    def extra_repr(self):
        return f"{2 * self.in_channels} -> {self.num_classes}"

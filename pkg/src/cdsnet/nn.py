"""Module containers and the real-valued layers used by the baseline CNNs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from . import tensor as T
from .tensor import ContractError, DimensionError, Tensor

__all__ = [
    "LayerMode",
    "BATCH_STATS",
    "RUNNING_STATS",
    "Parameter",
    "Module",
    "Sequential",
    "Conv2d",
    "BatchNorm2d",
    "ReLU",
    "MaxPool2d",
    "GlobalAvgPool",
    "Linear",
    "uniform_init",
]


@dataclass(frozen=True)
class LayerMode:
    """How normalization layers pick their statistics.

    Running statistics are only updated when ``training`` is set and
    ``statistics == "batch"``.
    """

    statistics: str = "batch"
    training: bool = True

    def __post_init__(self):
        if self.statistics not in ("batch", "running"):
            raise ContractError(f"statistics must be 'batch' or 'running', got {self.statistics!r}")

    @property
    def updates_running(self) -> bool:
        return self.training and self.statistics == "batch"


BATCH_STATS = LayerMode("batch", training=False)
RUNNING_STATS = LayerMode("running", training=False)


class Parameter(Tensor):
    __slots__ = ()

    def __init__(self, data, dtype=np.float32, name: Optional[str] = None):
        super().__init__(data, requires_grad=True, dtype=dtype, name=name)


def uniform_init(rng: np.random.Generator, shape, bound: float, dtype=np.float32) -> np.ndarray:
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Module:
    """Base class: parameters and buffers are discovered from attributes in
    definition order, so names are stable across runs."""

    def __init__(self):
        self.mode = LayerMode()
        self._buffers: dict[str, np.ndarray] = {}

    def forward(self, x):
        raise NotImplementedError

    def __call__(self, x):
        return self.forward(x)

    def children(self) -> Iterator[tuple[str, "Module"]]:
        for key, val in vars(self).items():
            if isinstance(val, Module):
                yield key, val

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for key, val in vars(self).items():
            if isinstance(val, Parameter):
                yield prefix + key, val
        for key, child in self.children():
            yield from child.named_parameters(f"{prefix}{key}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def register_buffer(self, name: str, value: np.ndarray) -> None:
        self._buffers[name] = value

    def named_buffers(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
        for key, val in self._buffers.items():
            yield prefix + key, val
        for key, child in self.children():
            yield from child.named_buffers(f"{prefix}{key}.")

    def set_mode(self, mode: LayerMode) -> "Module":
        self.mode = mode
        for _, child in self.children():
            child.set_mode(mode)
        return self

    def train(self) -> "Module":
        return self.set_mode(LayerMode("batch", training=True))

    def eval(self) -> "Module":
        return self.set_mode(LayerMode("running", training=False))

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {name: p.data.copy() for name, p in self.named_parameters()}
        for name, buf in self.named_buffers():
            state[name] = buf.copy()
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        expected = set(params) | {n for n, _ in self.named_buffers()}
        missing = expected - set(state)
        extra = set(state) - expected
        if missing or extra:
            raise ContractError(f"state mismatch: missing={sorted(missing)}, unexpected={sorted(extra)}")
        for name, p in params.items():
            arr = np.asarray(state[name])
            if arr.shape != p.shape:
                raise DimensionError(f"{name}: checkpoint shape {arr.shape} != model shape {p.shape}")
            p.data = arr.astype(p.dtype).copy()
        self._load_buffers(state, "")

    def _load_buffers(self, state, prefix):
        for key in self._buffers:
            cur = self._buffers[key]
            self._buffers[key] = np.asarray(state[prefix + key], dtype=cur.dtype).reshape(cur.shape).copy()
        for key, child in self.children():
            child._load_buffers(state, f"{prefix}{key}.")

    def astype(self, dtype) -> "Module":
        for p in self.parameters():
            p.data = p.data.astype(dtype)
        self._cast_buffers(dtype)
        return self

    def _cast_buffers(self, dtype):
        for key in self._buffers:
            self._buffers[key] = self._buffers[key].astype(dtype)
        for _, child in self.children():
            child._cast_buffers(dtype)

    def extra_repr(self) -> str:
        return ""

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.extra_repr()})"


class Sequential(Module):
    """Ordered list of named layers."""

    def __init__(self, layers: list[tuple[str, Module]]):
        super().__init__()
        names = [n for n, _ in layers]
        if len(set(names)) != len(names):
            raise ContractError(f"duplicate layer names: {names}")
        self.layer_names = names
        for name, layer in layers:
            setattr(self, name, layer)

    @property
    def layers(self) -> list[tuple[str, Module]]:
        return [(n, getattr(self, n)) for n in self.layer_names]

    def forward(self, x):
        for name in self.layer_names:
            x = getattr(self, name)(x)
        return x

    def trace(self, x) -> list[tuple[str, str, tuple, tuple]]:
        """Run ``x`` through the layers, recording (name, type, in shape, out shape)."""
        rows = []
        with T.no_grad():
            for name in self.layer_names:
                layer = getattr(self, name)
                before = x.shape
                x = layer(x)
                rows.append((name, type(layer).__name__, tuple(before), tuple(x.shape)))
        return rows

    def __repr__(self) -> str:
        body = "\n".join(f"  ({n}): {l!r}" for n, l in self.layers)
        return f"Sequential(\n{body}\n)"


# --------------------------------------------------------------------------
# real layers


class Conv2d(Module):
    def __init__(self, in_channels, out_channels, kernel_size, stride=1, padding=0, groups=1, bias=False, rng=None, dtype=np.float32):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        if in_channels % groups or out_channels % groups:
            raise DimensionError(f"Conv2d: channels {in_channels}->{out_channels} not divisible by groups={groups}")
        self.in_channels, self.out_channels = in_channels, out_channels
        self.kernel_size, self.stride, self.padding, self.groups = kernel_size, stride, padding, groups
        fan_in = in_channels // groups * kernel_size * kernel_size
        bound = 1.0 / np.sqrt(fan_in)
        self.weight = Parameter(uniform_init(rng, (out_channels, in_channels // groups, kernel_size, kernel_size), bound, dtype), dtype)
        self.bias = Parameter(uniform_init(rng, (out_channels, 1, 1), bound, dtype), dtype) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        out = T.conv2d(x, self.weight, self.groups, self.stride, self.padding)
        if self.bias is not None:
            out = out + T.broadcast_to(self.bias, out.shape[1:])
        return out

    def extra_repr(self):
        return f"{self.in_channels}, {self.out_channels}, k={self.kernel_size}, s={self.stride}, p={self.padding}, g={self.groups}"


class BatchNorm2d(Module):
    def __init__(self, channels, momentum=0.1, eps=1e-5, dtype=np.float32):
        super().__init__()
        self.channels, self.momentum, self.eps = channels, momentum, eps
        self.weight = Parameter(np.ones(channels), dtype)
        self.bias = Parameter(np.zeros(channels), dtype)
        self.register_buffer("running_mean", np.zeros(channels, dtype=dtype))
        self.register_buffer("running_var", np.ones(channels, dtype=dtype))

    def forward(self, x: Tensor) -> Tensor:
        c = self.channels
        if x.ndim != 4 or x.shape[1] != c:
            raise DimensionError(f"BatchNorm2d({c}): got input {x.shape}")
        shape = x.shape
        if self.mode.statistics == "batch":
            mu = T.mean(x, axis=(0, 2, 3), keepdims=True)
            xc = x - T.broadcast_to(mu, shape)
            var = T.mean(T.square(xc), axis=(0, 2, 3), keepdims=True)
            if self.mode.updates_running:
                m = self.momentum
                self._buffers["running_mean"] = ((1 - m) * self._buffers["running_mean"] + m * mu.data.reshape(c)).astype(x.dtype)
                self._buffers["running_var"] = ((1 - m) * self._buffers["running_var"] + m * var.data.reshape(c)).astype(x.dtype)
            xhat = xc / T.broadcast_to(T.sqrt(var + self.eps), shape)
        else:
            mu = self._buffers["running_mean"].reshape(c, 1, 1)
            sd = np.sqrt(self._buffers["running_var"] + self.eps).reshape(c, 1, 1)
            xhat = (x - Tensor(np.broadcast_to(mu, shape[1:]), dtype=x.dtype)) / Tensor(np.broadcast_to(sd, shape[1:]), dtype=x.dtype)
        w = T.broadcast_to(T.reshape(self.weight, (c, 1, 1)), shape[1:])
        b = T.broadcast_to(T.reshape(self.bias, (c, 1, 1)), shape[1:])
        return xhat * w + b

    def extra_repr(self):
        return str(self.channels)


class ReLU(Module):
    def forward(self, x):
        return T.relu(x)


class MaxPool2d(Module):
    def __init__(self, window: int):
        super().__init__()
        self.window = window

    def forward(self, x):
        return T.maxpool2d(x, self.window)

    def extra_repr(self):
        return str(self.window)


class GlobalAvgPool(Module):
    """[N,C,H,W] -> [N,C]."""

    def forward(self, x):
        return T.mean(x, axis=(2, 3))


class Linear(Module):
    def __init__(self, in_features, out_features, rng=None, dtype=np.float32):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_features, self.out_features = in_features, out_features
        bound = 1.0 / np.sqrt(in_features)
        self.weight = Parameter(uniform_init(rng, (in_features, out_features), bound, dtype), dtype)
        self.bias = Parameter(uniform_init(rng, (out_features,), bound, dtype), dtype)

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise DimensionError(f"Linear({self.in_features}->{self.out_features}): got input {x.shape}")
        return T.matmul(x, self.weight) + self.bias

    def extra_repr(self):
        return f"{self.in_features}, {self.out_features}"

"""Architecture builders, parameter counting and the checkpoint container."""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import nn
from .complex import ComplexTensor
from .encodings import reduce_average, reduce_binned, sliding_encode
from .errors import ContractError, FormatError
from .layers import ComplexBatchNorm, ComplexHead, ConjugateLayer, CReLU, Econv, EqMaxPool, ResBlock
from .tensor import Tensor

__all__ = [
    "ModelConfig",
    "ARCHITECTURES",
    "STEMS",
    "build_cds_large",
    "build_cds",
    "build_baseline",
    "build_model",
    "model_forward",
    "parameter_count",
    "save_checkpoint",
    "load_checkpoint",
    "CHECKPOINT_MAGIC",
]

ARCHITECTURES = ("cds-large", "cds-small", "baseline-cnn")
STEMS = ("none", "conv1x1", "8band", "deep-8band", "average", "binned-average")

# Gives ~67k parameters, close to the lean CDS-E model size.
CDS_SMALL_WIDTH = 0.1875

# Inner width of each residual branch as a fraction of the block width.
RESBLOCK_HIDDEN_RATIO = 8


@dataclass
class ModelConfig:
    """``input_channels`` counts real bands in the data; CDS models see one fewer complex channel."""

    architecture: str = "cds-large"
    input_channels: int = 8
    num_classes: int = 10
    stem: str = "none"
    width_multiplier: float = 1.0
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ContractError(f"unknown architecture {self.architecture!r}; expected one of {ARCHITECTURES}")
        if self.stem not in STEMS:
            raise ContractError(f"unknown stem {self.stem!r}; expected one of {STEMS}")
        if self.architecture.startswith("cds") and self.stem != "none":
            raise ContractError(f"{self.architecture} takes the sliding-encoded input; stem must be 'none'")
        if self.architecture == "baseline-cnn" and self.stem == "none":
            raise ContractError("baseline-cnn needs a channel-adaptation stem")
        if self.width_multiplier <= 0:
            raise ContractError(f"width_multiplier must be positive, got {self.width_multiplier}")
        if self.input_channels < 2:
            raise ContractError(f"input_channels must be >= 2, got {self.input_channels}")

    @property
    def complex_input(self) -> bool:
        return self.architecture.startswith("cds")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {k: d[k] for k in ("architecture", "input_channels", "num_classes", "stem", "width_multiplier", "seed", "extra") if k in d}
        return cls(**known)

    @classmethod
    def from_spec(cls, spec: str, **kw) -> "ModelConfig":
        """Parse CLI model names: ``cds-large``, ``cds-small`` or ``baseline:<stem>``."""
        if spec.startswith("baseline:"):
            return cls(architecture="baseline-cnn", stem=spec.split(":", 1)[1], **kw)
        if spec == "cds-small":
            kw.setdefault("width_multiplier", CDS_SMALL_WIDTH)
        return cls(architecture=spec, **kw)


def _width(base: int, mult: float, multiple: int = 4) -> int:
    return max(multiple, int(round(base * mult / multiple)) * multiple)


def _hidden(channels: int, groups: int) -> int:
    return max(groups, int(round(channels / RESBLOCK_HIDDEN_RATIO / groups)) * groups)


def build_cds(
    input_channels: int = 7,
    num_classes: int = 10,
    width_multiplier: float = 1.0,
    seed: int = 0,
    dtype=np.float32,
) -> nn.Sequential:
    """CDS-Large topology with every channel count scaled by ``width_multiplier``."""
    if input_channels < 1:
        raise ContractError(f"input_channels must be >= 1, got {input_channels}")
    rng = np.random.default_rng(seed)
    c1, c2, c3, c4 = (_width(b, width_multiplier) for b in (64, 128, 256, 512))
    h2 = _hidden(c2, 2)
    h4 = _hidden(c4, 4)
    kw = dict(rng=rng, dtype=dtype)
    layers = [
        ("econv1", Econv(input_channels, c1, 3, **kw)),
        ("conj1", ConjugateLayer(c1, **kw)),
        ("econv2", Econv(c1, c1, 3, groups=2, **kw)),
        ("cbn2", ComplexBatchNorm(c1, dtype=dtype)),
        ("crelu2", CReLU()),
        ("econv3", Econv(c1, c2, 3, groups=2, **kw)),
        ("cbn3", ComplexBatchNorm(c2, dtype=dtype)),
        ("crelu3", CReLU()),
        ("pool3", EqMaxPool(2)),
        ("res4", ResBlock(c2, groups=2, hidden=h2, **kw)),
        ("econv5", Econv(c2, c3, 3, groups=4, **kw)),
        ("cbn5", ComplexBatchNorm(c3, dtype=dtype)),
        ("crelu5", CReLU()),
        ("pool5", EqMaxPool(2)),
        ("econv6", Econv(c3, c4, 3, groups=2, **kw)),
        ("cbn6", ComplexBatchNorm(c4, dtype=dtype)),
        ("crelu6", CReLU()),
        ("pool6", EqMaxPool(2)),
        ("res7", ResBlock(c4, groups=4, hidden=h4, **kw)),
        ("pool7", EqMaxPool(4)),
        ("fc", ComplexHead(c4, num_classes, **kw)),
    ]
    return nn.Sequential(layers)


def build_cds_large(input_channels: int = 7, num_classes: int = 10, seed: int = 0, dtype=np.float32) -> nn.Sequential:
    return build_cds(input_channels, num_classes, 1.0, seed, dtype)


class _Reduce(nn.Module):
    def __init__(self, fn):
        super().__init__()
        self.fn = fn

    def forward(self, x):
        return self.fn(x)

    def extra_repr(self):
        return self.fn.__name__


def _conv_bn_relu(name, cin, cout, k, stride, pad, rng, dtype):
    return [
        (f"{name}_conv", nn.Conv2d(cin, cout, k, stride, pad, rng=rng, dtype=dtype)),
        (f"{name}_bn", nn.BatchNorm2d(cout, dtype=dtype)),
        (f"{name}_relu", nn.ReLU()),
    ]


def build_baseline(config: ModelConfig, dtype=np.float32) -> nn.Sequential:
    """Real CNN: channel-adaptation stem, then a fixed 64-128-256-512 trunk."""
    if config.architecture != "baseline-cnn":
        raise ContractError(f"build_baseline needs architecture 'baseline-cnn', got {config.architecture!r}")
    if config.stem in ("average", "binned-average", "conv1x1", "8band", "deep-8band") and config.input_channels != 8:
        raise ContractError(f"stem {config.stem!r} is defined for 8 input bands, got {config.input_channels}")
    rng = np.random.default_rng(config.seed)
    layers: list = []
    stem = config.stem
    if stem in ("average", "binned-average", "conv1x1"):
        if stem == "average":
            layers.append(("reduce", _Reduce(reduce_average)))
        elif stem == "binned-average":
            layers.append(("reduce", _Reduce(reduce_binned)))
        else:
            layers.append(("reduce", nn.Conv2d(8, 3, 1, bias=True, rng=rng, dtype=dtype)))
        layers += _conv_bn_relu("stem", 3, 64, 7, 2, 3, rng, dtype)
    elif stem == "8band":
        layers += _conv_bn_relu("stem", 8, 64, 7, 2, 3, rng, dtype)
    elif stem == "deep-8band":
        layers += _conv_bn_relu("stem1", 8, 32, 3, 2, 1, rng, dtype)
        layers += _conv_bn_relu("stem2", 32, 32, 3, 1, 1, rng, dtype)
        layers.append(("stem3_conv", nn.Conv2d(32, 64, 3, 1, 1, rng=rng, dtype=dtype)))
    else:
        raise ContractError(f"stem {stem!r} is not valid for a baseline")
    widths = (64, 128, 256, 512)
    cin = 64
    for i, cout in enumerate(widths, start=1):
        layers += _conv_bn_relu(f"stage{i}", cin, cout, 3, 1, 1, rng, dtype)
        if i < len(widths):
            layers.append((f"pool{i}", nn.MaxPool2d(2)))
        cin = cout
    layers.append(("gap", nn.GlobalAvgPool()))
    layers.append(("fc", nn.Linear(cin, config.num_classes, rng=rng, dtype=dtype)))
    return nn.Sequential(layers)


def build_model(config: ModelConfig, dtype=np.float32) -> nn.Sequential:
    if config.architecture == "baseline-cnn":
        model = build_baseline(config, dtype)
    else:
        mult = 1.0 if config.architecture == "cds-large" else config.width_multiplier
        model = build_cds(config.input_channels - 1, config.num_classes, mult, config.seed, dtype)
    model.config = config
    return model


def model_forward(model: nn.Sequential, batch) -> Tensor:
    """Logits for a real [N, bands, H, W] batch, sliding-encoding it first for CDS models."""
    x = batch if isinstance(batch, Tensor) else Tensor(batch, dtype=model.parameters()[0].dtype)
    config: Optional[ModelConfig] = getattr(model, "config", None)
    if config is not None and config.complex_input:
        return model(sliding_encode(x))
    if config is None and isinstance(model.layers[0][1], Econv):
        return model(sliding_encode(x))
    return model(x)


def parameter_count(model: nn.Module) -> int:
    """Trainable real scalars; a complex weight contributes its two real components."""
    return int(sum(p.size for p in model.parameters()))


# --------------------------------------------------------------------------
# checkpoint container
#
# magic "CDSCKPT1" | u32 manifest length | manifest JSON (utf-8) |
# per array, in manifest order: u32 element count, count little-endian f32

CHECKPOINT_MAGIC = b"CDSCKPT1"


def save_checkpoint(path, model: nn.Sequential, config: Optional[ModelConfig] = None, extra: Optional[dict] = None) -> None:
    config = config or getattr(model, "config", None)
    if config is None:
        raise ContractError("save_checkpoint needs a ModelConfig (pass one or use build_model)")
    params = [name for name, _ in model.named_parameters()]
    buffers = [name for name, _ in model.named_buffers()]
    state = model.state_dict()
    order = params + buffers
    manifest = {
        "format": "CDSCKPT",
        "version": 1,
        "config": config.to_dict(),
        "parameters": params,
        "buffers": buffers,
        "arrays": [{"name": n, "shape": list(state[n].shape), "count": int(state[n].size)} for n in order],
        "extra": extra or {},
    }
    blob = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for n in order:
            arr = np.ascontiguousarray(state[n], dtype="<f4")
            fh.write(struct.pack("<I", arr.size))
            fh.write(arr.tobytes())


def read_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    """Parse a checkpoint into (manifest, arrays) with per-array length checks."""
    raw = Path(path).read_bytes()
    if raw[:8] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad checkpoint magic {raw[:8]!r}", 0)
    if len(raw) < 12:
        raise FormatError(f"{path}: truncated header", len(raw))
    (mlen,) = struct.unpack_from("<I", raw, 8)
    off = 12
    if off + mlen > len(raw):
        raise FormatError(f"{path}: manifest of {mlen} bytes runs past end of file", off)
    try:
        manifest = json.loads(raw[off : off + mlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: manifest is not valid JSON: {exc}", off) from exc
    if manifest.get("version") != 1:
        raise FormatError(f"{path}: unsupported checkpoint version {manifest.get('version')}", off)
    off += mlen
    arrays = {}
    for entry in manifest["arrays"]:
        name, shape, count = entry["name"], tuple(entry["shape"]), entry["count"]
        if off + 4 > len(raw):
            raise FormatError(f"{path}: truncated before array {name!r}", off)
        (stored,) = struct.unpack_from("<I", raw, off)
        if stored != count or int(np.prod(shape)) != count:
            raise FormatError(f"{path}: array {name!r} length {stored} != manifest count {count} for shape {shape}", off)
        off += 4
        end = off + 4 * count
        if end > len(raw):
            raise FormatError(f"{path}: array {name!r} truncated ({len(raw) - off} of {4 * count} bytes)", off)
        arrays[name] = np.frombuffer(raw, dtype="<f4", count=count, offset=off).reshape(shape).astype(np.float32)
        off = end
    if off != len(raw):
        raise FormatError(f"{path}: {len(raw) - off} trailing bytes", off)
    return manifest, arrays


def load_checkpoint(path, dtype=np.float32) -> nn.Sequential:
    manifest, arrays = read_checkpoint(path)
    config = ModelConfig.from_dict(manifest["config"])
    model = build_model(config, dtype)
    model.load_state_dict(arrays)
    model.checkpoint_extra = manifest.get("extra", {})
    return model

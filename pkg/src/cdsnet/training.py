"""AdamW, augmentation and the step-based training loop."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import tensor as T
from .data import ChipDataset, iterate_batches
from .errors import ContractError, DataError, TrainingDivergedError
from .metrics import class_accuracy, instance_accuracy, predict
from .models import ModelConfig, model_forward, save_checkpoint
from .nn import RUNNING_STATS, LayerMode, Module

__all__ = [
    "AUGMENTATIONS",
    "TrainConfig",
    "AdamW",
    "augment",
    "predict_logits",
    "ValidationEvent",
    "TrainResult",
    "train",
    "default_augmentation",
]

log = logging.getLogger(__name__)

AUGMENTATIONS = ("none", "flips-crops")
PRECISIONS = {"f32": np.float32, "f64": np.float64}
CROP_PAD = 4


def default_augmentation(architecture: str) -> str:
    """CDS models train without augmentation; baselines get flips and crops."""
    return "none" if architecture.startswith("cds") else "flips-crops"


@dataclass
class TrainConfig:
    batch_size: int = 16
    learning_rate: float = 1e-4
    weight_decay: float = 1e-2
    total_batches: int = 15000
    validate_every: int = 200
    augmentation: str = "none"
    seed: int = 0
    precision: str = "f32"
    eval_batch_size: int = 256

    def __post_init__(self):
        for name in ("batch_size", "total_batches", "validate_every", "eval_batch_size"):
            if int(getattr(self, name)) <= 0:
                raise ContractError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.learning_rate > 0 or self.weight_decay < 0:
            raise ContractError(f"need learning_rate > 0 and weight_decay >= 0, got {self.learning_rate}, {self.weight_decay}")
        if self.total_batches % self.validate_every:
            raise ContractError(f"validate_every={self.validate_every} does not divide total_batches={self.total_batches}")
        if self.augmentation not in AUGMENTATIONS:
            raise ContractError(f"augmentation must be one of {AUGMENTATIONS}, got {self.augmentation!r}")
        if self.precision not in PRECISIONS:
            raise ContractError(f"precision must be one of {tuple(PRECISIONS)}, got {self.precision!r}")

    @property
    def dtype(self):
        return PRECISIONS[self.precision]

    @property
    def validation_events(self) -> int:
        return self.total_batches // self.validate_every

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ContractError(f"unknown TrainConfig fields: {sorted(unknown)}")
        return cls(**d)


class AdamW:
    """Adam with decoupled weight decay: theta -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)."""

    def __init__(self, named_params, lr: float = 1e-4, weight_decay: float = 1e-2, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = list(named_params)
        self.lr, self.weight_decay, self.eps = lr, weight_decay, eps
        self.beta1, self.beta2 = betas
        self.m = {name: np.zeros_like(p.data) for name, p in self.params}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params}
        self.t = 0

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for name, p in self.params:
            g = p.grad
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise TrainingDivergedError(f"non-finite gradient in parameter {name!r} at step {self.t}", self.t)
            m = self.m[name] = b1 * self.m[name] + (1 - b1) * g
            v = self.v[name] = b2 * self.v[name] + (1 - b2) * g * g
            m_hat = m / c1
            v_hat = v / c2
            p.data = (p.data - self.lr * (m_hat / (np.sqrt(v_hat) + self.eps) + self.weight_decay * p.data)).astype(p.dtype)


def augment(batch: np.ndarray, policy: str, rng: np.random.Generator) -> np.ndarray:
    """``none`` returns the input; ``flips-crops`` flips each axis with p=0.5 then crops after 4-px zero padding."""
    if policy == "none":
        return batch
    if policy != "flips-crops":
        raise ContractError(f"unknown augmentation policy {policy!r}")
    n, _, h, w = batch.shape
    hflip = rng.random(n) < 0.5
    vflip = rng.random(n) < 0.5
    offs = rng.integers(0, 2 * CROP_PAD + 1, size=(n, 2))
    out = batch.copy()
    out[hflip] = out[hflip][..., ::-1]
    out[vflip] = out[vflip][..., ::-1, :]
    pad = np.pad(out, ((0, 0), (0, 0), (CROP_PAD, CROP_PAD), (CROP_PAD, CROP_PAD)))
    for i in range(n):
        dy, dx = offs[i]
        out[i] = pad[i, :, dy : dy + h, dx : dx + w]
    return out


def predict_logits(model: Module, pixels: np.ndarray, batch_size: int = 256, mode: LayerMode = RUNNING_STATS) -> np.ndarray:
    """Logits for a real pixel array without building a graph."""
    prev = model.mode
    model.set_mode(mode)
    dtype = model.parameters()[0].dtype
    out = []
    try:
        with T.no_grad():
            for start in range(0, len(pixels), batch_size):
                out.append(model_forward(model, pixels[start : start + batch_size].astype(dtype)).data)
    finally:
        model.set_mode(prev)
    return np.concatenate(out) if out else np.zeros((0, 0), dtype=dtype)


@dataclass
class ValidationEvent:
    step: int
    val_i_acc: float
    val_c_acc: float
    is_best: bool


@dataclass
class TrainResult:
    best_state: dict
    best_step: int
    best_val_i_acc: float
    validations: list = field(default_factory=list)
    losses: list = field(default_factory=list)


def _check_dataset(model: Module, ds: ChipDataset) -> None:
    for split in ("train", "val"):
        if split not in ds.pixels:
            raise DataError(f"dataset has no {split!r} split")
        if len(ds.labels[split]) == 0:
            raise DataError(f"{split!r} split is empty")
    config: Optional[ModelConfig] = getattr(model, "config", None)
    bands = ds.pixels["train"].shape[1]
    if config is not None and config.input_channels != bands:
        raise DataError(f"model expects {config.input_channels} input bands, dataset has {bands}")


def train(
    model: Module,
    dataset: ChipDataset,
    config: TrainConfig,
    log_path=None,
    checkpoint_path=None,
    on_step: Optional[Callable[[int, float], None]] = None,
) -> TrainResult:
    """Run exactly ``config.total_batches`` AdamW steps.

    Every ``validate_every`` steps the model is scored on the val split with
    running statistics; the state with the highest val I-Acc (earliest on
    ties) is kept, written to ``checkpoint_path`` if given, and loaded back
    into ``model`` when training ends.  ``log_path`` receives one JSON line
    per step and per validation.
    """
    _check_dataset(model, dataset)
    dtype = config.dtype
    model.astype(dtype)
    opt = AdamW(model.named_parameters(), config.learning_rate, config.weight_decay)
    aug_rng = np.random.default_rng([config.seed, 1])
    num_classes = dataset.manifest.num_classes
    val_x, val_y = dataset.pixels["val"], dataset.labels["val"]

    log_fh = open(log_path, "w", encoding="utf-8") if log_path is not None else None
    result = TrainResult(best_state=model.state_dict(), best_step=0, best_val_i_acc=-1.0)

    def emit(record):
        if log_fh is not None:
            log_fh.write(json.dumps(record) + "\n")

    def batches():
        epoch = 0
        while True:
            yield from iterate_batches(dataset, "train", config.batch_size, shuffle_seed=config.seed, epoch=epoch)
            epoch += 1

    stream = batches()
    try:
        for step in range(1, config.total_batches + 1):
            x, y = next(stream)
            x = augment(x, config.augmentation, aug_rng).astype(dtype)
            model.train()
            model.zero_grad()
            loss = T.cross_entropy(model_forward(model, x), y)
            value = float(loss.item())
            if not np.isfinite(value):
                raise TrainingDivergedError(f"loss became {value} at step {step}", step, result.best_state)
            T.backward(loss)
            try:
                opt.step()
            except TrainingDivergedError as exc:
                raise TrainingDivergedError(str(exc), step, result.best_state) from None
            result.losses.append(value)
            emit({"step": step, "loss": value})
            if on_step is not None:
                on_step(step, value)

            if step % config.validate_every == 0:
                preds = predict(predict_logits(model, val_x, config.eval_batch_size))
                i_acc = instance_accuracy(preds, val_y)
                c_acc = class_accuracy(preds, val_y, num_classes)
                is_best = i_acc > result.best_val_i_acc
                if is_best:
                    result.best_state = model.state_dict()
                    result.best_step, result.best_val_i_acc = step, i_acc
                    if checkpoint_path is not None:
                        save_checkpoint(checkpoint_path, model, extra={"step": step, "val_i_acc": i_acc})
                event = ValidationEvent(step, i_acc, c_acc, is_best)
                result.validations.append(event)
                emit(asdict(event))
                log.info("step %d  loss %.4f  val I-Acc %.4f  C-Acc %.4f%s", step, value, i_acc, c_acc, "  *" if is_best else "")
    finally:
        if log_fh is not None:
            log_fh.close()

    model.load_state_dict(result.best_state)
    return result


def read_log(path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]

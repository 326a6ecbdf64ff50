"""Post-hoc logit adjustment, accuracy metrics and evaluation reports."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ContractError, DimensionError

__all__ = [
    "class_prior",
    "logit_adjust",
    "predict",
    "instance_accuracy",
    "class_accuracy",
    "per_class_recall",
    "confusion_matrix",
    "ClassResult",
    "EvalReport",
    "evaluate_logits",
]


def class_prior(counts: Sequence[int]) -> np.ndarray:
    """Normalized class frequencies; zero-count classes get 1/(total + N) before renormalizing."""
    counts = np.asarray(counts, dtype=np.float64)
    if counts.ndim != 1 or counts.size == 0:
        raise ContractError(f"counts must be a non-empty vector, got shape {counts.shape}")
    if np.any(counts < 0):
        raise ContractError("class counts must be non-negative")
    total = counts.sum()
    if total == 0:
        return np.full(counts.size, 1.0 / counts.size)
    p = counts / total
    p = np.where(counts == 0, 1.0 / (total + counts.size), p)
    return p / p.sum()


def logit_adjust(logits: np.ndarray, prior: np.ndarray, tau: float = 1.0) -> np.ndarray:
    """logits - tau * log(prior), broadcast over the leading axis."""
    logits = np.asarray(logits)
    prior = np.asarray(prior, dtype=np.float64)
    if not np.isfinite(tau):
        raise ContractError(f"tau must be finite, got {tau}")
    if logits.shape[-1] != prior.shape[-1]:
        raise DimensionError(f"logits have {logits.shape[-1]} classes, prior has {prior.shape[-1]}")
    if np.any(prior <= 0):
        bad = np.flatnonzero(prior <= 0).tolist()
        raise ContractError(f"prior must be strictly positive; classes {bad} are not (apply the count floor first)")
    return logits - tau * np.log(prior)


def predict(logits: np.ndarray) -> np.ndarray:
    """Argmax over the class axis; ties go to the lowest class index."""
    return np.argmax(np.asarray(logits), axis=-1)


def _check_pair(preds, labels):
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.shape != labels.shape:
        raise DimensionError(f"preds {preds.shape} and labels {labels.shape} differ")
    if preds.size == 0:
        raise ContractError("cannot score an empty prediction set")
    return preds, labels


def instance_accuracy(preds, labels) -> float:
    preds, labels = _check_pair(preds, labels)
    return float(np.mean(preds == labels))


def per_class_recall(preds, labels, num_classes: int) -> np.ndarray:
    """Recall per class; NaN where the class has no support."""
    cm = confusion_matrix(preds, labels, num_classes)
    support = cm.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(support > 0, np.diag(cm) / np.maximum(support, 1), np.nan)


def class_accuracy(preds, labels, num_classes: int) -> float:
    """Mean per-class recall over classes present in ``labels``."""
    recall = per_class_recall(preds, labels, num_classes)
    return float(np.nanmean(recall))


def confusion_matrix(preds, labels, num_classes: int) -> np.ndarray:
    """counts[true, pred]."""
    preds, labels = _check_pair(preds, labels)
    if labels.min() < 0 or labels.max() >= num_classes or preds.min() < 0 or preds.max() >= num_classes:
        raise ContractError(f"labels and predictions must lie in [0, {num_classes})")
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (labels, preds), 1)
    return cm


@dataclass
class ClassResult:
    name: str
    support: int
    recall: Optional[float]


@dataclass
class EvalReport:
    i_acc: float
    c_acc: float
    per_class: list
    confusion: list
    logit_adjustment: dict = field(default_factory=lambda: {"enabled": False, "tau": 0.0})

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def evaluate_logits(
    logits: np.ndarray,
    labels: np.ndarray,
    class_names: Sequence[str],
    prior: Optional[np.ndarray] = None,
    tau: float = 1.0,
) -> EvalReport:
    """Score raw logits, optionally after logit adjustment with ``prior``."""
    k = len(class_names)
    enabled = prior is not None
    scores = logit_adjust(logits, prior, tau) if enabled else np.asarray(logits)
    preds = predict(scores)
    cm = confusion_matrix(preds, labels, k)
    recall = per_class_recall(preds, labels, k)
    per_class = [
        asdict(ClassResult(str(class_names[j]), int(cm[j].sum()), None if np.isnan(recall[j]) else float(recall[j])))
        for j in range(k)
    ]
    return EvalReport(
        i_acc=instance_accuracy(preds, labels),
        c_acc=class_accuracy(preds, labels, k),
        per_class=per_class,
        confusion=cm.tolist(),
        logit_adjustment={"enabled": enabled, "tau": float(tau) if enabled else 0.0},
    )

"""Accuracy, top-5 accuracy, macro F-1 and per-emoji accuracy."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .model import rank_topk

F1_AVERAGING = "macro over all |E| classes; zero-support classes count as 0"
PER_EMOJI_DENOMINATOR = "all examples (binary present/absent decision per emoji)"


def _as_index_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a flat sequence of indices")
    return arr


def _check_pair(predictions, labels) -> tuple[np.ndarray, np.ndarray]:
    p = _as_index_array(predictions, "predictions")
    y = _as_index_array(labels, "labels")
    if p.size != y.size:
        raise ValueError(f"length mismatch: {p.size} predictions vs {y.size} labels")
    if p.size == 0:
        raise ValueError("cannot score an empty prediction list")
    return p, y


def accuracy(predictions: Sequence[int], labels: Sequence[int]) -> float:
    p, y = _check_pair(predictions, labels)
    return float(np.count_nonzero(p == y)) / p.size


def top5_accuracy(rankings: Sequence[Sequence[int]], labels: Sequence[int], class_count: int | None = None) -> float:
    """Fraction of labels found anywhere in their ranking.

    Each ranking must hold 5 distinct indices, or all ``class_count`` of them
    when fewer than 5 classes exist.
    """
    if len(rankings) != len(labels):
        raise ValueError(f"length mismatch: {len(rankings)} rankings vs {len(labels)} labels")
    if not labels:
        raise ValueError("cannot score an empty prediction list")
    width = 5 if class_count is None else min(5, class_count)
    hits = 0
    for ranking, label in zip(rankings, labels):
        ranking = [int(r) for r in ranking]
        if len(set(ranking)) != len(ranking):
            raise ValueError(f"duplicate entries in ranking {ranking}")
        if len(ranking) != width:
            raise ValueError(f"ranking {ranking} must have exactly {width} entries")
        hits += int(label) in ranking
    return hits / len(labels)


def confusion_matrix(predictions, labels, class_count: int) -> np.ndarray:
    """Rows are true classes, columns predicted classes."""
    p, y = _check_pair(predictions, labels)
    if min(p.min(), y.min()) < 0 or max(p.max(), y.max()) >= class_count:
        raise IndexError(f"class index outside [0, {class_count})")
    cm = np.zeros((class_count, class_count), dtype=np.int64)
    np.add.at(cm, (y, p), 1)
    return cm


def per_class_f1(predictions, labels, class_count: int) -> np.ndarray:
    cm = confusion_matrix(predictions, labels, class_count)
    tp = np.diag(cm).astype(np.float64)
    predicted = cm.sum(axis=0)
    actual = cm.sum(axis=1)
    precision = np.divide(tp, predicted, out=np.zeros(class_count), where=predicted > 0)
    recall = np.divide(tp, actual, out=np.zeros(class_count), where=actual > 0)
    denom = precision + recall
    return np.divide(2 * precision * recall, denom, out=np.zeros(class_count), where=denom > 0)


def f1_macro(predictions, labels, class_count: int) -> float:
    """Unweighted mean of per-class F-1 over all ``class_count`` classes."""
    return math.fsum(per_class_f1(predictions, labels, class_count)) / class_count


def per_emoji_accuracy(predicted_sets, label_sets, width: int | None = None) -> tuple[np.ndarray, float]:
    """Per-emoji accuracy of the present/absent decision over all examples, and its mean.

    Both inputs are ``(n_examples, |E|)`` boolean matrices (or anything
    ``np.asarray`` turns into one).
    """
    pred = np.asarray(predicted_sets, dtype=bool)
    gold = np.asarray(label_sets, dtype=bool)
    if pred.ndim != 2 or pred.shape != gold.shape:
        raise ValueError(f"bitset shape mismatch: {pred.shape} vs {gold.shape}")
    if width is not None and pred.shape[1] != width:
        raise ValueError(f"bitset width {pred.shape[1]} != |E| = {width}")
    if pred.shape[0] == 0:
        raise ValueError("cannot score an empty prediction list")
    per = (pred == gold).mean(axis=0)
    return per, math.fsum(per) / per.size


@dataclass
class MetricsReport:
    setting: str
    example_count: int
    accuracy: float
    top5_accuracy: float | None = None
    f1_macro: float | None = None
    per_emoji_accuracy: list[float] | None = None
    mean_per_emoji_accuracy: float | None = None
    support: list[int] = field(default_factory=list)
    f1_averaging: str = F1_AVERAGING
    per_emoji_denominator: str = PER_EMOJI_DENOMINATOR

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_lines(self, labels: Sequence[str] | None = None) -> str:
        """Human-readable report, percentages with two decimals."""
        out = [f"setting\t{self.setting}", f"examples\t{self.example_count}", f"ACC\t{100 * self.accuracy:.2f}"]
        if self.top5_accuracy is not None:
            out.append(f"ACC@5\t{100 * self.top5_accuracy:.2f}")
        if self.f1_macro is not None:
            out.append(f"F-1\t{100 * self.f1_macro:.2f}")
        if self.mean_per_emoji_accuracy is not None:
            out.append(f"mean per-emoji ACC\t{100 * self.mean_per_emoji_accuracy:.2f}")
        if self.per_emoji_accuracy is not None:
            for i, acc in enumerate(self.per_emoji_accuracy):
                name = labels[i] if labels is not None else str(i)
                out.append(f"ACC[{name}]\t{100 * acc:.2f}")
        return "\n".join(out) + "\n"

    def save(self, directory: str | Path, labels: Sequence[str] | None = None, stem: str = "metrics") -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / f"{stem}.json").write_text(self.to_json(), encoding="utf-8")
        (directory / f"{stem}.txt").write_text(self.to_lines(labels), encoding="utf-8")


def evaluate_multiclass(probabilities: np.ndarray, labels: Sequence[int]) -> MetricsReport:
    """Metrics from an ``(n, |E|)`` probability matrix."""
    probs = np.asarray(probabilities, dtype=np.float64)
    n, k = probs.shape
    labels = [int(y) for y in labels]
    rankings = [rank_topk(row, min(5, k)) for row in probs]
    preds = [r[0] for r in rankings]
    return MetricsReport(
        setting="multiclass",
        example_count=n,
        accuracy=accuracy(preds, labels),
        top5_accuracy=top5_accuracy(rankings, labels, class_count=k),
        f1_macro=f1_macro(preds, labels, k),
        support=np.bincount(labels, minlength=k).tolist(),
    )


def evaluate_multilabel(predicted_sets, label_sets) -> MetricsReport:
    """Metrics from ``(n, |E|)`` boolean prediction and label matrices.

    ``accuracy`` is exact-set-match accuracy.
    """
    pred = np.asarray(predicted_sets, dtype=bool)
    gold = np.asarray(label_sets, dtype=bool)
    per, mean = per_emoji_accuracy(pred, gold)
    return MetricsReport(
        setting="multilabel",
        example_count=int(pred.shape[0]),
        accuracy=float(np.all(pred == gold, axis=1).mean()),
        per_emoji_accuracy=per.tolist(),
        mean_per_emoji_accuracy=mean,
        support=gold.sum(axis=0).astype(int).tolist(),
    )

"""Losses, backpropagation, gradient checking and the training loop."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DatasetError, DimensionError, NumericError
from .model import (
    HeadKind,
    ModelConfig,
    Parameters,
    backward,
    forward,
    init_params,
    presence_logits,
    presence_scores,
    sigmoid,
)
from .preprocess import Document
from .seeding import rng_stream

log = logging.getLogger(__name__)


class Optimizer(str, enum.Enum):
    SGD = "sgd"
    ADAM = "adam"


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    epochs: int = 5
    batch_size: int = 64
    seed: int = 0
    optimizer: Optimizer = Optimizer.ADAM
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self) -> None:
        object.__setattr__(self, "optimizer", Optimizer(self.optimizer))
        if self.learning_rate < 0 or not math.isfinite(self.learning_rate):
            raise ConfigError(f"learning_rate must be finite and >= 0, got {self.learning_rate}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["optimizer"] = self.optimizer.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class Example:
    """A tokenized document with its target: class index or 0/1 vector over E."""

    doc: Document
    target: int | np.ndarray


def _check_finite(z: np.ndarray) -> None:
    if not np.all(np.isfinite(z)):
        raise NumericError("non-finite logits")


def _logsumexp(z: np.ndarray) -> float:
    m = z.max()
    return float(m + np.log(np.exp(z - m).sum()))


def loss_multiclass(logits: np.ndarray, label: int) -> float:
    """Cross-entropy ``-log softmax(logits)[label]``."""
    z = np.asarray(logits, dtype=np.float64)
    _check_finite(z)
    if not 0 <= label < z.size:
        raise DimensionError(f"label {label} out of range for {z.size} classes")
    return max(_logsumexp(z) - float(z[label]), 0.0)


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def loss_multilabel(logit_pairs: np.ndarray, labels) -> float:
    """Mean per-emoji binary cross-entropy of the presence scores."""
    z = np.asarray(logit_pairs, dtype=np.float64)
    _check_finite(z)
    y = np.asarray(labels, dtype=np.float64)
    d = presence_logits(z)
    if d.size != y.size:
        raise DimensionError(f"{d.size} logit pairs but {y.size} label bits")
    # BCE(sigmoid(d), y) = softplus(d) - y*d
    return float(np.mean(_softplus(d) - y * d))


def _loss_and_dlogits(z: np.ndarray, target, config: ModelConfig) -> tuple[float, np.ndarray]:
    if config.head_kind is HeadKind.MULTICLASS:
        loss = loss_multiclass(z, target)
        p = np.exp(z - z.max())
        p /= p.sum()
        p[target] -= 1.0
        return loss, p
    y = np.asarray(target, dtype=np.float64)
    loss = loss_multilabel(z, y)
    dd = (sigmoid(presence_logits(z)) - y) / y.size
    dz = np.empty_like(z)
    dz[0::2] = dd
    dz[1::2] = -dd
    return loss, dz


def batch_loss(batch: Sequence[Example], params: Parameters, config: ModelConfig) -> float:
    total = 0.0
    for ex in batch:
        z, _, _ = forward(ex.doc, params, config)
        total += _loss_and_dlogits(z, ex.target, config)[0]
    return total / len(batch)


def backprop(batch: Sequence[Example], params: Parameters, config: ModelConfig) -> tuple[float, Parameters]:
    """Mean batch loss and its exact gradient with respect to every parameter."""
    if not batch:
        raise DatasetError("cannot backpropagate an empty batch")
    grads = params.zeros_like()
    total = 0.0
    scale = 1.0 / len(batch)
    for ex in batch:
        z, _, cache = forward(ex.doc, params, config, keep_cache=True)
        loss, dz = _loss_and_dlogits(z, ex.target, config)
        total += loss
        backward(cache, dz * scale, params, config, grads)
    return total * scale, grads


@dataclass
class GradCheckResult:
    max_relative_error: float
    coordinates: np.ndarray
    analytic: np.ndarray
    numeric: np.ndarray

    @property
    def relative_errors(self) -> np.ndarray:
        denom = np.maximum(np.maximum(np.abs(self.analytic), np.abs(self.numeric)), 1e-8)
        return np.abs(self.analytic - self.numeric) / denom


def sample_coordinates(params: Parameters, n: int, seed: int = 0) -> np.ndarray:
    """``n`` flat indices: a tensor is drawn uniformly, then a coordinate inside it.

    Sampling tensors first keeps small tensors (biases, gains) from being
    swamped by the embedding tables.
    """
    rng = rng_stream(seed, "gradcheck")
    names = list(params)
    out = []
    for _ in range(n):
        name = names[rng.integers(len(names))]
        out.append(params.offset(name) + int(rng.integers(params[name].size)))
    return np.array(out, dtype=np.int64)


def grad_check(
    params: Parameters,
    batch: Sequence[Example],
    config: ModelConfig,
    eps: float = 1e-4,
    n_coords: int = 200,
    seed: int = 0,
    coordinates: Sequence[int] | None = None,
    gradient_fn: Callable[[Sequence[Example], Parameters, ModelConfig], tuple[float, Parameters]] = backprop,
) -> GradCheckResult:
    """Compare analytic gradients with central finite differences.

    ``gradient_fn`` defaults to :func:`backprop`; pass another to test the
    checker itself.
    """
    coords = np.asarray(coordinates if coordinates is not None else sample_coordinates(params, n_coords, seed))
    _, grads = gradient_fn(batch, params, config)
    flat_grads = grads.flatten()
    work = params.copy()
    analytic = np.empty(coords.size)
    numeric = np.empty(coords.size)
    for j, c in enumerate(coords):
        c = int(c)
        orig = work.get_flat(c)
        work.set_flat(c, orig + eps)
        f_plus = batch_loss(batch, work, config)
        work.set_flat(c, orig - eps)
        f_minus = batch_loss(batch, work, config)
        work.set_flat(c, orig)
        numeric[j] = (f_plus - f_minus) / (2.0 * eps)
        analytic[j] = flat_grads[c]
    result = GradCheckResult(0.0, coords, analytic, numeric)
    result.max_relative_error = float(result.relative_errors.max()) if coords.size else 0.0
    return result


class _Adam:
    def __init__(self, params: Parameters, cfg: TrainConfig):
        self.cfg = cfg
        self.m = params.zeros_like()
        self.v = params.zeros_like()
        self.t = 0

    def step(self, params: Parameters, grads: Parameters) -> None:
        c = self.cfg
        self.t += 1
        bc1 = 1.0 - c.beta1**self.t
        bc2 = 1.0 - c.beta2**self.t
        for name, g in grads.items():
            m, v = self.m[name], self.v[name]
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            params[name][...] -= c.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + c.adam_eps)


class _SGD:
    def __init__(self, params: Parameters, cfg: TrainConfig):
        self.lr = cfg.learning_rate

    def step(self, params: Parameters, grads: Parameters) -> None:
        for name, g in grads.items():
            params[name][...] -= self.lr * g


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_loss: float | None
    dev_accuracy: float | None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    params: Parameters
    history: list[EpochRecord] = field(default_factory=list)


def _kind_of(ex: Example) -> HeadKind:
    return HeadKind.MULTICLASS if np.ndim(ex.target) == 0 else HeadKind.MULTILABEL


def _check_dataset(examples: Sequence[Example], config: ModelConfig, name: str) -> None:
    for ex in examples:
        if _kind_of(ex) is not config.head_kind:
            raise DatasetError(f"{name} set holds {_kind_of(ex).value} examples, model head is {config.head_kind.value}")
        if config.head_kind is HeadKind.MULTILABEL and np.size(ex.target) != config.label_count:
            raise DimensionError(f"{name} label width {np.size(ex.target)} != label_count {config.label_count}")


def evaluate_loss_accuracy(examples: Sequence[Example], params: Parameters, config: ModelConfig) -> tuple[float, float]:
    """Mean loss and accuracy (top-1 for multi-class, mean per-emoji for multi-label)."""
    total_loss = 0.0
    hits = 0.0
    for ex in examples:
        z, _, _ = forward(ex.doc, params, config)
        total_loss += _loss_and_dlogits(z, ex.target, config)[0]
        if config.head_kind is HeadKind.MULTICLASS:
            hits += float(int(np.argmax(z)) == ex.target)
        else:
            pred = presence_scores(z) > 0.5
            hits += float(np.mean(pred == np.asarray(ex.target, dtype=bool)))
    n = len(examples)
    return total_loss / n, hits / n


def train(
    train_set: Sequence[Example],
    dev_set: Sequence[Example],
    model_config: ModelConfig,
    train_config: TrainConfig = TrainConfig(),
    params: Parameters | None = None,
    trainable: Sequence[str] | None = None,
) -> TrainResult:
    """Mini-batch training with a seeded per-epoch shuffle.

    Parameters are snapped to float32 after every update so a saved
    checkpoint reproduces the in-memory model exactly. ``trainable`` limits
    updates to the named tensors (e.g. only the head).
    """
    if not train_set:
        raise DatasetError("training set is empty")
    _check_dataset(train_set, model_config, "train")
    _check_dataset(dev_set, model_config, "dev")
    params = init_params(model_config, train_config.seed) if params is None else params.copy()
    opt = (_Adam if train_config.optimizer is Optimizer.ADAM else _SGD)(params, train_config)
    rng = rng_stream(train_config.seed, "shuffle")
    history: list[EpochRecord] = []
    n = len(train_set)
    bs = train_config.batch_size
    for epoch in range(1, train_config.epochs + 1):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, bs):
            batch = [train_set[i] for i in order[start : start + bs]]
            loss, grads = backprop(batch, params, model_config)
            if trainable is not None:
                for name in params:
                    if name not in trainable:
                        grads[name][...] = 0.0
            opt.step(params, grads)
            params.round_to_float32()
            epoch_loss += loss * len(batch)
        dev_loss = dev_acc = None
        if dev_set:
            dev_loss, dev_acc = evaluate_loss_accuracy(dev_set, params, model_config)
        record = EpochRecord(epoch, epoch_loss / n, dev_loss, dev_acc)
        history.append(record)
        log.info("epoch %d train_loss=%.6f dev_loss=%s dev_acc=%s", epoch, record.train_loss, dev_loss, dev_acc)
    return TrainResult(params, history)

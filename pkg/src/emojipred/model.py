"""From-scratch post-LN transformer encoder with multi-class and multi-label heads.

Everything runs in float64 numpy, one document at a time. A document is never
padded, so its encoding does not depend on which batch it came in.

The multi-label head emits two logits per emoji, ``(present, absent)``; the
presence probability is ``sigmoid(present - absent)``.
"""

from __future__ import annotations

import enum
import math
from collections import OrderedDict
from dataclasses import asdict, dataclass
from typing import Iterator

import numpy as np
from scipy.special import erf

from .errors import ConfigError, DimensionError, NumericError
from .preprocess import Document
from .seeding import rng_stream

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class HeadKind(str, enum.Enum):
    MULTICLASS = "multiclass"
    MULTILABEL = "multilabel"


@dataclass(frozen=True)
class ModelConfig:
    word_vocab_size: int
    label_count: int
    head_kind: HeadKind = HeadKind.MULTICLASS
    layers: int = 2
    heads: int = 4
    hidden: int = 64
    ffn_dim: int = 128
    max_seq_len: int = 128
    dropout: float = 0.0
    layer_norm_eps: float = 1e-12

    def __post_init__(self) -> None:
        object.__setattr__(self, "head_kind", HeadKind(self.head_kind))
        for name in ("word_vocab_size", "label_count", "layers", "heads", "hidden", "ffn_dim", "max_seq_len"):
            value = getattr(self, name)
            minimum = 0 if name == "layers" else 1
            if not isinstance(value, (int, np.integer)) or value < minimum:
                raise ConfigError(f"{name} must be an integer >= {minimum}, got {value!r}")
        if self.hidden % self.heads:
            raise ConfigError(f"hidden ({self.hidden}) is not divisible by heads ({self.heads})")
        if self.dropout != 0.0:
            raise ConfigError("dropout is not supported; it must stay 0 for deterministic gradients")

    @property
    def head_dim(self) -> int:
        return self.hidden // self.heads

    @property
    def output_dim(self) -> int:
        return self.label_count * (2 if self.head_kind is HeadKind.MULTILABEL else 1)

    @classmethod
    def full_scale(cls, word_vocab_size: int, label_count: int, head_kind=HeadKind.MULTICLASS) -> "ModelConfig":
        return cls(word_vocab_size, label_count, head_kind, layers=12, heads=12, hidden=768, ffn_dim=3072, max_seq_len=128)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["head_kind"] = self.head_kind.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


def param_shapes(config: ModelConfig) -> "OrderedDict[str, tuple[int, ...]]":
    """Parameter names and shapes in their fixed flat order.

    The key projection has no bias: a per-query constant added to every
    attention score cancels in the softmax, so such a bias never has a gradient.
    """
    h, f = config.hidden, config.ffn_dim
    shapes: OrderedDict[str, tuple[int, ...]] = OrderedDict()
    shapes["embed.tokens"] = (config.word_vocab_size, h)
    shapes["embed.positions"] = (config.max_seq_len, h)
    for layer in range(config.layers):
        p = f"layer{layer}."
        shapes[p + "attn.wq"] = (h, h)
        shapes[p + "attn.bq"] = (h,)
        shapes[p + "attn.wk"] = (h, h)
        shapes[p + "attn.wv"] = (h, h)
        shapes[p + "attn.bv"] = (h,)
        shapes[p + "attn.wo"] = (h, h)
        shapes[p + "attn.bo"] = (h,)
        shapes[p + "ln1.gain"] = (h,)
        shapes[p + "ln1.bias"] = (h,)
        shapes[p + "ffn.w1"] = (h, f)
        shapes[p + "ffn.b1"] = (f,)
        shapes[p + "ffn.w2"] = (f, h)
        shapes[p + "ffn.b2"] = (h,)
        shapes[p + "ln2.gain"] = (h,)
        shapes[p + "ln2.bias"] = (h,)
    shapes["head.w"] = (h, config.output_dim)
    shapes["head.b"] = (config.output_dim,)
    return shapes


class Parameters:
    """Named float64 tensors with a stable flat addressing scheme."""

    def __init__(self, tensors: "OrderedDict[str, np.ndarray]"):
        self.tensors = tensors
        offsets, total = {}, 0
        for name, arr in tensors.items():
            offsets[name] = total
            total += arr.size
        self._offsets = offsets
        self.size = total

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __setitem__(self, name: str, value) -> None:
        # in-place: the flat layout and any views stay valid
        target = self.tensors[name]
        if value is not target:
            target[...] = value

    def __iter__(self) -> Iterator[str]:
        return iter(self.tensors)

    def items(self):
        return self.tensors.items()

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {k: v.shape for k, v in self.tensors.items()}

    def zeros_like(self) -> "Parameters":
        return Parameters(OrderedDict((k, np.zeros_like(v)) for k, v in self.tensors.items()))

    def copy(self) -> "Parameters":
        return Parameters(OrderedDict((k, v.copy()) for k, v in self.tensors.items()))

    def locate(self, flat_index: int) -> tuple[str, tuple[int, ...]]:
        if not 0 <= flat_index < self.size:
            raise IndexError(f"flat index {flat_index} out of range for {self.size} parameters")
        for name, arr in self.tensors.items():
            start = self._offsets[name]
            if flat_index < start + arr.size:
                return name, np.unravel_index(flat_index - start, arr.shape)
        raise AssertionError("unreachable")

    def get_flat(self, flat_index: int) -> float:
        name, idx = self.locate(flat_index)
        return float(self.tensors[name][idx])

    def set_flat(self, flat_index: int, value: float) -> None:
        name, idx = self.locate(flat_index)
        self.tensors[name][idx] = value

    def flatten(self) -> np.ndarray:
        return np.concatenate([v.ravel() for v in self.tensors.values()])

    def offset(self, name: str) -> int:
        return self._offsets[name]

    def round_to_float32(self) -> None:
        """Snap every value to the nearest float32 so checkpoints round-trip exactly."""
        for arr in self.tensors.values():
            arr[...] = arr.astype(np.float32)

    def equals(self, other: "Parameters") -> bool:
        return list(self.tensors) == list(other.tensors) and all(
            np.array_equal(v, other.tensors[k]) for k, v in self.tensors.items()
        )


def init_params(config: ModelConfig, seed: int = 0) -> Parameters:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights; zero biases; unit layer-norm gains."""
    rng = rng_stream(seed, "init")
    tensors: OrderedDict[str, np.ndarray] = OrderedDict()
    for name, shape in param_shapes(config).items():
        leaf = name.rsplit(".", 1)[1]
        if leaf == "gain":
            arr = np.ones(shape)
        elif len(shape) == 1:
            arr = np.zeros(shape)
        else:
            # embedding tables are looked up, not multiplied: their fan-in is the row width
            fan_in = shape[1] if name.startswith("embed.") else shape[0]
            bound = 1.0 / math.sqrt(fan_in)
            arr = rng.uniform(-bound, bound, size=shape)
        tensors[name] = arr.astype(np.float64)
    params = Parameters(tensors)
    params.round_to_float32()
    return params


def check_params(params: Parameters, config: ModelConfig) -> None:
    expected = param_shapes(config)
    if list(params) != list(expected):
        raise DimensionError("parameter names do not match the model config")
    for name, shape in expected.items():
        if params[name].shape != shape:
            raise DimensionError(f"{name}: expected shape {shape}, got {params[name].shape}")


def check_doc(doc: Document, config: ModelConfig) -> np.ndarray:
    ids = np.asarray(doc.tokens, dtype=np.int64)
    if ids.ndim != 1 or ids.size == 0:
        raise DimensionError("document must contain at least the [CLS] token")
    if ids.size > config.max_seq_len:
        raise DimensionError(f"document length {ids.size} exceeds max_seq_len {config.max_seq_len}")
    if ids.min() < 0 or ids.max() >= config.word_vocab_size:
        raise DimensionError(f"token id out of range for word_vocab_size {config.word_vocab_size}")
    return ids


def gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / _SQRT2))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + erf(x / _SQRT2)) + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def _layer_norm(u, gain, bias, eps):
    mu = u.mean(axis=-1, keepdims=True)
    centered = u - mu
    rstd = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * rstd
    return xhat * gain + bias, (xhat, rstd)


def _layer_norm_backward(dy, gain, cache):
    xhat, rstd = cache
    dxhat = dy * gain
    du = rstd * (
        dxhat - dxhat.mean(axis=-1, keepdims=True) - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return du, (dy * xhat).sum(axis=0), dy.sum(axis=0)


def _softmax_rows(s: np.ndarray) -> np.ndarray:
    e = np.exp(s - s.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def forward(doc: Document, params: Parameters, config: ModelConfig, keep_cache: bool = False):
    """Encoder plus head for one document.

    Returns ``(logits, pooled, cache)``; ``cache`` is ``None`` unless
    ``keep_cache`` is set, in which case it feeds :func:`backward`.
    """
    ids = check_doc(doc, config)
    check_params(params, config)
    T, nh, dh = ids.size, config.heads, config.head_dim
    scale = 1.0 / math.sqrt(dh)
    eps = config.layer_norm_eps

    x = params["embed.tokens"][ids] + params["embed.positions"][:T]
    layer_caches = []
    for layer in range(config.layers):
        p = f"layer{layer}."
        x_in = x
        q = x @ params[p + "attn.wq"] + params[p + "attn.bq"]
        k = x @ params[p + "attn.wk"]
        v = x @ params[p + "attn.wv"] + params[p + "attn.bv"]
        qh = q.reshape(T, nh, dh).transpose(1, 0, 2)
        kh = k.reshape(T, nh, dh).transpose(1, 0, 2)
        vh = v.reshape(T, nh, dh).transpose(1, 0, 2)
        attn = _softmax_rows(qh @ kh.transpose(0, 2, 1) * scale)
        ctx = (attn @ vh).transpose(1, 0, 2).reshape(T, config.hidden)
        o = ctx @ params[p + "attn.wo"] + params[p + "attn.bo"]
        h1, ln1 = _layer_norm(x_in + o, params[p + "ln1.gain"], params[p + "ln1.bias"], eps)
        z1 = h1 @ params[p + "ffn.w1"] + params[p + "ffn.b1"]
        g = gelu(z1)
        f = g @ params[p + "ffn.w2"] + params[p + "ffn.b2"]
        x, ln2 = _layer_norm(h1 + f, params[p + "ln2.gain"], params[p + "ln2.bias"], eps)
        if keep_cache:
            layer_caches.append((x_in, qh, kh, vh, attn, ctx, h1, ln1, z1, g, ln2))

    pooled = x[0]
    logits = pooled @ params["head.w"] + params["head.b"]
    cache = (ids, pooled, layer_caches) if keep_cache else None
    return logits, pooled, cache


def backward(cache, dlogits: np.ndarray, params: Parameters, config: ModelConfig, grads: Parameters) -> None:
    """Accumulate d(loss)/d(params) into ``grads`` given d(loss)/d(logits)."""
    ids, pooled, layer_caches = cache
    T, nh, dh, H = ids.size, config.heads, config.head_dim, config.hidden
    scale = 1.0 / math.sqrt(dh)

    grads["head.w"] += np.outer(pooled, dlogits)
    grads["head.b"] += dlogits
    dx = np.zeros((T, H))
    dx[0] = params["head.w"] @ dlogits

    for layer in reversed(range(config.layers)):
        p = f"layer{layer}."
        x_in, qh, kh, vh, attn, ctx, h1, ln1, z1, g, ln2 = layer_caches[layer]

        du2, dgain, dbias = _layer_norm_backward(dx, params[p + "ln2.gain"], ln2)
        grads[p + "ln2.gain"] += dgain
        grads[p + "ln2.bias"] += dbias

        # FFN branch; du2 also flows straight through the residual into h1
        grads[p + "ffn.w2"] += g.T @ du2
        grads[p + "ffn.b2"] += du2.sum(axis=0)
        dz1 = (du2 @ params[p + "ffn.w2"].T) * gelu_grad(z1)
        grads[p + "ffn.w1"] += h1.T @ dz1
        grads[p + "ffn.b1"] += dz1.sum(axis=0)
        dh1 = du2 + dz1 @ params[p + "ffn.w1"].T

        du1, dgain, dbias = _layer_norm_backward(dh1, params[p + "ln1.gain"], ln1)
        grads[p + "ln1.gain"] += dgain
        grads[p + "ln1.bias"] += dbias

        grads[p + "attn.wo"] += ctx.T @ du1
        grads[p + "attn.bo"] += du1.sum(axis=0)
        dctx = (du1 @ params[p + "attn.wo"].T).reshape(T, nh, dh).transpose(1, 0, 2)
        dattn = dctx @ vh.transpose(0, 2, 1)
        dvh = attn.transpose(0, 2, 1) @ dctx
        dscores = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True)) * scale
        dqh = dscores @ kh
        dkh = dscores.transpose(0, 2, 1) @ qh

        dq = dqh.transpose(1, 0, 2).reshape(T, H)
        dk = dkh.transpose(1, 0, 2).reshape(T, H)
        dv = dvh.transpose(1, 0, 2).reshape(T, H)
        grads[p + "attn.wq"] += x_in.T @ dq
        grads[p + "attn.bq"] += dq.sum(axis=0)
        grads[p + "attn.wk"] += x_in.T @ dk
        grads[p + "attn.wv"] += x_in.T @ dv
        grads[p + "attn.bv"] += dv.sum(axis=0)
        dx = du1 + dq @ params[p + "attn.wq"].T + dk @ params[p + "attn.wk"].T + dv @ params[p + "attn.wv"].T

    np.add.at(grads["embed.tokens"], ids, dx)
    grads["embed.positions"][:T] += dx


def encode(doc: Document, params: Parameters, config: ModelConfig) -> np.ndarray:
    """Pooled ([CLS]-position) representation, length ``hidden``."""
    return forward(doc, params, config)[1]


def logits(doc: Document, params: Parameters, config: ModelConfig) -> np.ndarray:
    """Raw head output: ``|E|`` values, or ``2|E|`` ``(present, absent)`` pairs flattened."""
    return forward(doc, params, config)[0]


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise NumericError("non-finite logits")
    e = np.exp(z - z.max())
    return e / e.sum()


def presence_logits(z: np.ndarray) -> np.ndarray:
    """Per-emoji ``present - absent`` logit from a flat ``2|E|`` head output."""
    pairs = np.asarray(z, dtype=np.float64).reshape(-1, 2)
    return pairs[:, 0] - pairs[:, 1]


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def presence_scores(z: np.ndarray) -> np.ndarray:
    return sigmoid(presence_logits(z))


def _require_kind(config: ModelConfig, kind: HeadKind) -> None:
    if config.head_kind is not kind:
        raise ConfigError(f"model has a {config.head_kind.value} head, {kind.value} was requested")


def predict_multiclass(doc: Document, params: Parameters, config: ModelConfig) -> np.ndarray:
    _require_kind(config, HeadKind.MULTICLASS)
    return softmax(logits(doc, params, config))


def rank_topk(probs, k: int) -> list[int]:
    """Indices of the ``k`` largest scores, descending; ties go to the lower index."""
    probs = np.asarray(probs)
    if not 1 <= k <= probs.size:
        raise ValueError(f"k={k} must be between 1 and |E|={probs.size}")
    order = np.lexsort((np.arange(probs.size), -probs))
    return [int(i) for i in order[:k]]


def threshold_presence(scores, threshold: float = 0.5) -> set[int]:
    """Emoji indices whose presence score is strictly greater than ``threshold``."""
    return {int(i) for i in np.flatnonzero(np.asarray(scores) > threshold)}


def predict_multilabel(doc: Document, params: Parameters, config: ModelConfig, threshold: float = 0.5) -> set[int]:
    _require_kind(config, HeadKind.MULTILABEL)
    return threshold_presence(presence_scores(logits(doc, params, config)), threshold)

"""Checkpoint files: safetensors container with float32 little-endian tensors.

All non-tensor state (configs, seed, both vocabularies, preprocessing
settings) lives in one JSON string under the ``emojipred`` metadata key, along
with SHA-256 digests of the vocabularies, the tensor payload and the metadata
itself. Loading recomputes and checks every digest.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from safetensors import SafetensorError, safe_open
from safetensors.numpy import save

from .dataset import EmojiVocabulary
from .errors import CheckpointError
from .model import ModelConfig, Parameters, check_params, param_shapes
from .preprocess import WordVocabulary
from .trainer import TrainConfig

FORMAT = "emojipred-checkpoint/1"
_META_KEY = "emojipred"


@dataclass
class Checkpoint:
    params: Parameters
    model_config: ModelConfig
    train_config: TrainConfig
    word_vocab: WordVocabulary
    emoji_vocab: EmojiVocabulary
    extra: dict = field(default_factory=dict)

    @property
    def seed(self) -> int:
        return self.train_config.seed


def _sha256(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def _tensor_digest(tensors: dict[str, np.ndarray], names) -> str:
    h = hashlib.sha256()
    for name in names:
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        h.update(name.encode("utf-8"))
        h.update(repr(arr.shape).encode("ascii"))
        h.update(arr.tobytes())
    return h.hexdigest()


def _dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    check_params(ckpt.params, ckpt.model_config)
    tensors = {name: np.ascontiguousarray(arr, dtype="<f4") for name, arr in ckpt.params.items()}
    word_tsv = ckpt.word_vocab.to_tsv()
    emoji_tsv = ckpt.emoji_vocab.to_tsv()
    meta = {
        "format": FORMAT,
        "model_config": ckpt.model_config.to_dict(),
        "train_config": ckpt.train_config.to_dict(),
        "seed": ckpt.seed,
        "tensor_order": list(ckpt.params),
        "word_vocab": word_tsv,
        "word_vocab_min_frequency": ckpt.word_vocab.min_frequency,
        "emoji_vocab": emoji_tsv,
        "emoji_vocab_meta": {
            "tie_break_rule": ckpt.emoji_vocab.tie_break_rule,
            "source_corpus_hash": ckpt.emoji_vocab.source_corpus_hash,
        },
        "extra": ckpt.extra,
        "hashes": {
            "word_vocab": _sha256(word_tsv),
            "emoji_vocab": _sha256(emoji_tsv),
            "tensors": _tensor_digest(tensors, ckpt.params),
        },
    }
    meta["hashes"]["metadata"] = _sha256(_dumps(meta))
    Path(path).write_bytes(save(tensors, metadata={_META_KEY: _dumps(meta)}))


def load_checkpoint(path: str | Path) -> Checkpoint:
    """Read and verify a checkpoint; any digest mismatch raises ``CheckpointError``."""
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        with safe_open(str(path), framework="numpy") as fh:
            raw = (fh.metadata() or {}).get(_META_KEY)
            tensors = {name: fh.get_tensor(name) for name in fh.keys()}
    except (SafetensorError, OSError, ValueError) as exc:
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from exc
    if raw is None:
        raise CheckpointError(f"{path}: missing emojipred metadata")
    try:
        meta = json.loads(raw)
        hashes = meta["hashes"]
        claimed_meta_hash = hashes.pop("metadata")
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CheckpointError(f"{path}: malformed metadata") from exc
    if _sha256(_dumps(meta)) != claimed_meta_hash:
        raise CheckpointError(f"{path}: metadata hash mismatch")
    if meta.get("format") != FORMAT:
        raise CheckpointError(f"{path}: unsupported format {meta.get('format')!r}")
    if _sha256(meta["word_vocab"]) != hashes["word_vocab"]:
        raise CheckpointError(f"{path}: word vocabulary hash mismatch")
    if _sha256(meta["emoji_vocab"]) != hashes["emoji_vocab"]:
        raise CheckpointError(f"{path}: emoji vocabulary hash mismatch")
    order = meta["tensor_order"]
    if set(order) != set(tensors):
        raise CheckpointError(f"{path}: tensor names do not match metadata")
    if _tensor_digest(tensors, order) != hashes["tensors"]:
        raise CheckpointError(f"{path}: tensor payload hash mismatch")

    model_config = ModelConfig.from_dict(meta["model_config"])
    expected = param_shapes(model_config)
    if list(expected) != order:
        raise CheckpointError(f"{path}: tensor layout does not match the model config")
    params = Parameters({name: tensors[name].astype(np.float64) for name in order})
    try:
        check_params(params, model_config)
    except ValueError as exc:
        raise CheckpointError(f"{path}: {exc}") from exc
    word_vocab = WordVocabulary.from_tsv(meta["word_vocab"], meta.get("word_vocab_min_frequency", 1))
    emoji_vocab = EmojiVocabulary.from_tsv(meta["emoji_vocab"], **meta["emoji_vocab_meta"])
    if len(word_vocab) != model_config.word_vocab_size or emoji_vocab.K != model_config.label_count:
        raise CheckpointError(f"{path}: vocabulary sizes disagree with the model config")
    return Checkpoint(
        params=params,
        model_config=model_config,
        train_config=TrainConfig.from_dict(meta["train_config"]),
        word_vocab=word_vocab,
        emoji_vocab=emoji_vocab,
        extra=meta.get("extra", {}),
    )

"""File-level pipeline steps behind the CLI subcommands.

Every step writes a ``manifest.json`` next to its outputs recording the
config snapshot, SHA-256 of each input file, the seed, the toolkit version
and the Unicode emoji data version.
"""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .dataset import (
    BalanceConfig,
    EmojiVocabulary,
    LabeledExample,
    build,
    prepare_text,
    read_corpus,
    read_dataset,
    stats,
    write_dataset,
)
from .emoji_unicode import EmojiDataTable, default_table
from .errors import ConfigError, DatasetError
from .evaluator import MetricsReport, evaluate_multiclass, evaluate_multilabel
from .model import HeadKind, ModelConfig, forward, presence_scores, rank_topk, softmax, threshold_presence
from .preprocess import NormalizationConfig, WordVocabulary, tokenize
from .trainer import Example, TrainConfig, train

log = logging.getLogger(__name__)

SPLITS = ("train", "dev", "test")
EMOJI_VOCAB_FILE = "emoji_vocab.tsv"
WORD_VOCAB_FILE = "word_vocab.tsv"
CHECKPOINT_FILE = "checkpoint.safetensors"
EMPTY_SET_MARKER = "<none>"

DEDUP_NOTE = "documents repeated verbatim in the corpus are not deduplicated"
TOPK_NOTE = "label set is the top-K emojis by frequency; K=64 is not the hand-clustered 64-emoji set"


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _dump_json(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def write_manifest(out_dir: Path, subcommand: str, config: dict, inputs: dict[str, Path], seed: int,
                   unicode_version: str) -> dict:
    manifest = {
        "subcommand": subcommand,
        "config": config,
        "inputs": {name: {"file": Path(p).name, "sha256": file_sha256(p)} for name, p in sorted(inputs.items())},
        "seed": seed,
        "toolkit_version": __version__,
        "unicode_emoji_version": unicode_version,
    }
    (out_dir / "manifest.json").write_text(_dump_json(manifest), encoding="utf-8")
    return manifest


def load_json_config(path: str | Path | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return data


_BUILD_KEYS = {"ratios", "balance", "normalization", "min_word_frequency", "canonicalize"}


def build_dataset(
    corpus_path: str | Path,
    K: int,
    setting: str,
    out_dir: str | Path,
    seed: int = 0,
    config: dict | None = None,
    apply_balance: bool = False,
    table: EmojiDataTable | None = None,
) -> dict:
    """Build train/dev/test files, both vocabularies, stats and a manifest in ``out_dir``."""
    config = dict(config or {})
    unknown = set(config) - _BUILD_KEYS
    if unknown:
        raise ConfigError(f"unknown build config keys: {sorted(unknown)}")
    table = table or default_table()
    ratios = tuple(config.get("ratios", (0.8, 0.1, 0.1)))
    prep = NormalizationConfig.from_dict(config.get("normalization", {}))
    min_word_frequency = int(config.get("min_word_frequency", 1))
    canonical = bool(config.get("canonicalize", True))
    balance_config = None
    if apply_balance:
        b = config.get("balance")
        if not isinstance(b, dict) or "cap" not in b or "floor" not in b:
            raise ConfigError("--balance needs a 'balance' section with 'cap' and 'floor' in the build config")
        balance_config = BalanceConfig(int(b["cap"]), int(b["floor"]), seed)

    corpus_path = Path(corpus_path)
    records = read_corpus(corpus_path)
    corpus_hash = file_sha256(corpus_path)
    result = build(
        records,
        K,
        setting,
        seed=seed,
        prep=prep,
        ratios=ratios,  # type: ignore[arg-type]
        balance_config=balance_config,
        min_word_frequency=min_word_frequency,
        canonical=canonical,
        corpus_hash=corpus_hash,
        table=table,
    )

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result.vocab.save(out / EMOJI_VOCAB_FILE)
    result.word_vocab.save(out / WORD_VOCAB_FILE)
    snapshot = {
        "K": K,
        "setting": setting,
        "ratios": list(ratios),
        "balance": None if balance_config is None else {"cap": balance_config.cap, "floor": balance_config.floor},
        "normalization": prep.to_dict(),
        "min_word_frequency": min_word_frequency,
        "canonicalize": canonical,
    }
    header_base = {
        "setting": setting,
        "seed": seed,
        "config": snapshot,
        "source_corpus_sha256": corpus_hash,
        "word_vocab_sha256": result.word_vocab.digest(),
        "unicode_emoji_version": table.version,
        "emoji_vocab": result.vocab.metadata(),
        "notes": {"deduplication": DEDUP_NOTE, "label_set": TOPK_NOTE},
    }
    report = {"diagnostics": result.diagnostics}
    for name in SPLITS:
        write_dataset(out / f"{name}.jsonl", result.splits[name], result.vocab, {**header_base, "split": name})
        report[name] = stats(result.splits[name]).to_dict(result.vocab)
    (out / "stats.json").write_text(_dump_json(report), encoding="utf-8")
    return write_manifest(out, "build-dataset", snapshot, {"corpus": corpus_path}, seed, table.version)


def load_split(dataset_dir: Path, split: str) -> tuple[dict, list[LabeledExample], EmojiVocabulary, WordVocabulary]:
    vocab = EmojiVocabulary.load(dataset_dir / EMOJI_VOCAB_FILE)
    header, examples = read_dataset(dataset_dir / f"{split}.jsonl", vocab)
    word_vocab = WordVocabulary.load(
        dataset_dir / WORD_VOCAB_FILE, header.get("config", {}).get("min_word_frequency", 1)
    )
    if word_vocab.digest() != header.get("word_vocab_sha256"):
        raise DatasetError(f"{dataset_dir / WORD_VOCAB_FILE}: word vocabulary hash mismatch with {split} header")
    meta = header.get("emoji_vocab", {})
    vocab = EmojiVocabulary(vocab.emojis, vocab.frequencies, source_corpus_hash=meta.get("source_corpus_hash", ""))
    return header, examples, vocab, word_vocab


def to_examples(labeled: Sequence[LabeledExample], word_vocab: WordVocabulary, K: int, max_seq_len: int) -> list[Example]:
    out = []
    for ex in labeled:
        target = ex.bitset(K).astype(np.float64) if ex.is_multilabel else int(ex.label)
        out.append(Example(ex.document(word_vocab, max_seq_len), target))
    return out


def resolve_model_config(raw: dict, word_vocab_size: int, label_count: int, setting: str) -> ModelConfig:
    raw = dict(raw)
    preset = raw.pop("preset", None)
    base: dict = {}
    if preset == "full":
        base = ModelConfig.full_scale(1, 1).to_dict()
    elif preset not in (None, "desk"):
        raise ConfigError(f"unknown model preset {preset!r}")
    base.update(raw)
    for key, derived in (("word_vocab_size", word_vocab_size), ("label_count", label_count)):
        if key in raw and raw[key] != derived:
            raise ConfigError(f"model config {key}={raw[key]} but the dataset implies {derived}")
        base[key] = derived
    kind = base.setdefault("head_kind", setting)
    if kind != setting:
        raise ConfigError(f"model head_kind {kind!r} does not match the {setting} dataset")
    return ModelConfig.from_dict(base)


def train_model(
    dataset_dir: str | Path,
    model_config_path: str | Path,
    train_config_path: str | Path,
    out_dir: str | Path,
    seed: int | None = None,
) -> dict:
    """Train on ``train.jsonl`` (tracking ``dev.jsonl``); write checkpoint, history and manifest."""
    dataset_dir = Path(dataset_dir)
    header, train_labeled, vocab, word_vocab = load_split(dataset_dir, "train")
    dev_header, dev_labeled, _, _ = load_split(dataset_dir, "dev")
    setting = header["setting"]
    model_config = resolve_model_config(load_json_config(model_config_path), len(word_vocab), vocab.K, setting)
    train_raw = load_json_config(train_config_path)
    if seed is not None:
        train_raw["seed"] = seed
    train_config = TrainConfig.from_dict(train_raw)

    train_set = to_examples(train_labeled, word_vocab, vocab.K, model_config.max_seq_len)
    dev_set = to_examples(dev_labeled, word_vocab, vocab.K, model_config.max_seq_len)
    if not train_set:
        raise DatasetError(f"{dataset_dir}/train.jsonl has no examples")
    result = train(train_set, dev_set, model_config, train_config)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    extra = {
        "setting": setting,
        "normalization": header["config"]["normalization"],
        "canonicalize": header["config"]["canonicalize"],
        "unicode_emoji_version": header.get("unicode_emoji_version"),
        "dataset_seed": header.get("seed"),
    }
    save_checkpoint(out / CHECKPOINT_FILE, Checkpoint(result.params, model_config, train_config, word_vocab, vocab, extra))
    (out / "history.jsonl").write_text(
        "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in result.history), encoding="utf-8"
    )
    inputs = {name: dataset_dir / f for name, f in (
        ("train", "train.jsonl"), ("dev", "dev.jsonl"), ("emoji_vocab", EMOJI_VOCAB_FILE), ("word_vocab", WORD_VOCAB_FILE)
    )}
    inputs["model_config"] = Path(model_config_path)
    inputs["train_config"] = Path(train_config_path)
    snapshot = {"model": model_config.to_dict(), "train": train_config.to_dict()}
    return write_manifest(out, "train", snapshot, inputs, train_config.seed, header.get("unicode_emoji_version", ""))


def _predict_matrix(ckpt: Checkpoint, examples: Sequence[Example]) -> np.ndarray:
    return np.stack([forward(ex.doc, ckpt.params, ckpt.model_config)[0] for ex in examples])


def evaluate_checkpoint(checkpoint_path: str | Path, split_path: str | Path, out_dir: str | Path | None = None) -> MetricsReport:
    """Score a checkpoint on one dataset split file, optionally writing ``metrics.{json,txt}``."""
    ckpt = load_checkpoint(checkpoint_path)
    header, labeled = read_dataset(split_path, ckpt.emoji_vocab)
    kind = ckpt.model_config.head_kind
    if header["setting"] != kind.value:
        raise ConfigError(f"checkpoint has a {kind.value} head but {split_path} is {header['setting']}")
    if not labeled:
        raise DatasetError(f"{split_path} has no examples")
    K = ckpt.emoji_vocab.K
    examples = to_examples(labeled, ckpt.word_vocab, K, ckpt.model_config.max_seq_len)
    z = _predict_matrix(ckpt, examples)
    if kind is HeadKind.MULTICLASS:
        probs = np.stack([softmax(row) for row in z])
        report = evaluate_multiclass(probs, [ex.target for ex in examples])
    else:
        predicted = np.stack([presence_scores(row) > 0.5 for row in z])
        gold = np.stack([ex.target.astype(bool) for ex in examples])
        report = evaluate_multilabel(predicted, gold)
    if out_dir is not None:
        out = Path(out_dir)
        report.save(out, labels=ckpt.emoji_vocab.emojis)
        write_manifest(out, "eval", {"split_file": Path(split_path).name},
                       {"checkpoint": Path(checkpoint_path), "split": Path(split_path)},
                       ckpt.seed, ckpt.extra.get("unicode_emoji_version") or "")
    return report


def predict_text(ckpt: Checkpoint, text: str, topk: int = 5, table: EmojiDataTable | None = None) -> list[str]:
    """Ranked top-k emojis (multi-class) or the thresholded emoji set (multi-label).

    Emojis in ``text`` are stripped first, exactly as during dataset construction.
    """
    prep = NormalizationConfig.from_dict(ckpt.extra.get("normalization", {}))
    doc = tokenize(prepare_text(text, prep, table), ckpt.word_vocab, ckpt.model_config.max_seq_len)
    z = forward(doc, ckpt.params, ckpt.model_config)[0]
    emojis = ckpt.emoji_vocab.emojis
    if ckpt.model_config.head_kind is HeadKind.MULTICLASS:
        return [emojis[i] for i in rank_topk(softmax(z), min(topk, len(emojis)))]
    scores = presence_scores(z)
    chosen = threshold_presence(scores)
    return [emojis[i] for i in sorted(chosen, key=lambda i: (-scores[i], i))]


def dataset_stats(split_path: str | Path, vocab_path: str | Path | None = None) -> dict:
    split_path = Path(split_path)
    vocab = EmojiVocabulary.load(vocab_path or split_path.parent / EMOJI_VOCAB_FILE)
    _, examples = read_dataset(split_path, vocab)
    return stats(examples).to_dict(vocab)


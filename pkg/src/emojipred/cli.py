"""Command-line entry point: ``emojipred {build-dataset,train,eval,predict,stats}``.

Failures print one line ``error[<category>]: <message>`` to stderr and exit
with a nonzero code specific to the category.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .checkpoint import load_checkpoint
from .emoji_unicode import EmojiDataTable
from .errors import ConfigError, EmojiPredError
from .pipeline import (
    EMPTY_SET_MARKER,
    build_dataset,
    dataset_stats,
    evaluate_checkpoint,
    load_json_config,
    predict_text,
    train_model,
)

EXIT_CODES = {
    "config": 3,
    "dataset": 4,
    "vocabulary": 5,
    "checkpoint": 6,
    "dimension": 7,
    "numeric": 8,
    "io": 9,
    "internal": 10,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emojipred", description="Emoji prediction toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    parser.add_argument(
        "--emoji-data",
        metavar="DIR",
        help="directory with emoji-data.txt and emoji-test.txt (default: the bundled Unicode data)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-dataset", help="label a raw corpus and write train/dev/test splits")
    p.add_argument("corpus", help="JSON-lines corpus with 'id' and 'text' fields")
    p.add_argument("-k", "--k", dest="K", type=int, required=True, help="size of the emoji label set")
    p.add_argument("--setting", choices=("multiclass", "multilabel"), required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="build config (JSON): ratios, balance, normalization, ...")
    p.add_argument("--balance", action="store_true", help="balance the train split (needs cap/floor in --config)")

    p = sub.add_parser("train", help="train a model on a built dataset directory")
    p.add_argument("dataset_dir")
    p.add_argument("--model-config", required=True)
    p.add_argument("--train-config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, help="override the seed in the train config")

    p = sub.add_parser("eval", help="score a checkpoint on a dataset split file")
    p.add_argument("checkpoint")
    p.add_argument("split", help="dataset split file, e.g. data/test.jsonl")
    p.add_argument("--out", help="directory for metrics.json / metrics.txt")

    p = sub.add_parser("predict", help="predict emojis for a piece of text")
    p.add_argument("checkpoint")
    p.add_argument("text")
    p.add_argument("--topk", type=int, default=5, help="number of ranked emojis (multiclass)")

    p = sub.add_parser("stats", help="summarize a dataset split file")
    p.add_argument("split")
    p.add_argument("--vocab", help="emoji vocabulary file (default: next to the split)")
    return parser


def _table(args: argparse.Namespace) -> EmojiDataTable | None:
    if args.emoji_data is None:
        return None
    base = Path(args.emoji_data)
    return EmojiDataTable.load(base / "emoji-data.txt", base / "emoji-test.txt")


def _run(args: argparse.Namespace) -> int:
    if args.command == "build-dataset":
        config = load_json_config(args.config)
        build_dataset(args.corpus, args.K, args.setting, args.out, args.seed, config, args.balance, _table(args))
        with open(f"{args.out}/stats.json", encoding="utf-8") as fh:
            report = json.load(fh)
        sizes = {name: report[name]["example_count"] for name in ("train", "dev", "test")}
        print(json.dumps(sizes, sort_keys=True))
    elif args.command == "train":
        train_model(args.dataset_dir, args.model_config, args.train_config, args.out, args.seed)
        with open(f"{args.out}/history.jsonl", encoding="utf-8") as fh:
            sys.stdout.write(fh.read())
    elif args.command == "eval":
        report = evaluate_checkpoint(args.checkpoint, args.split, args.out)
        sys.stdout.write(report.to_lines())
    elif args.command == "predict":
        ckpt = load_checkpoint(args.checkpoint)
        if args.topk < 1:
            raise ConfigError(f"--topk must be >= 1, got {args.topk}")
        emojis = predict_text(ckpt, args.text, args.topk, _table(args))
        print(" ".join(emojis) if emojis else EMPTY_SET_MARKER)
    elif args.command == "stats":
        print(json.dumps(dataset_stats(args.split, args.vocab), ensure_ascii=False, sort_keys=True, indent=2))
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except (EmojiPredError, OSError) as exc:
        category = exc.category if isinstance(exc, EmojiPredError) else "io"
        message = str(exc).replace("\n", " ")
        print(f"error[{category}]: {message}", file=sys.stderr)
        return EXIT_CODES.get(category, 1)

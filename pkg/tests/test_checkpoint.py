import numpy as np
import pytest

from emojipred.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from emojipred.dataset import EmojiVocabulary
from emojipred.errors import CheckpointError
from emojipred.model import HeadKind, ModelConfig, forward, init_params
from emojipred.preprocess import build_word_vocab, tokenize
from emojipred.trainer import TrainConfig


@pytest.fixture
def ckpt():
    words = build_word_vocab(["good night love", "game day"], 1)
    emojis = EmojiVocabulary(("😂", "❤️", "🔥"), (9, 4, 4), source_corpus_hash="abc")
    cfg = ModelConfig(len(words), 3, HeadKind.MULTILABEL, layers=1, heads=2, hidden=8, ffn_dim=8, max_seq_len=12)
    return Checkpoint(init_params(cfg, 3), cfg, TrainConfig(seed=3), words, emojis, {"setting": "multilabel"})


def test_roundtrip_is_lossless(tmp_path, ckpt):
    path = tmp_path / "m.safetensors"
    save_checkpoint(path, ckpt)
    back = load_checkpoint(path)
    assert back.params.equals(ckpt.params)
    assert back.model_config == ckpt.model_config and back.train_config == ckpt.train_config
    assert back.word_vocab.tokens == ckpt.word_vocab.tokens
    assert back.emoji_vocab.emojis == ckpt.emoji_vocab.emojis
    assert back.emoji_vocab.digest() == ckpt.emoji_vocab.digest()
    assert back.extra == ckpt.extra and back.seed == 3
    doc = tokenize("good game", ckpt.word_vocab)
    a = forward(doc, ckpt.params, ckpt.model_config)[0]
    b = forward(doc, back.params, back.model_config)[0]
    assert a.tobytes() == b.tobytes()


def test_save_is_deterministic(tmp_path, ckpt):
    save_checkpoint(tmp_path / "a", ckpt)
    save_checkpoint(tmp_path / "b", ckpt)
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()


def test_tensor_corruption_refused(tmp_path, ckpt):
    path = tmp_path / "m.safetensors"
    save_checkpoint(path, ckpt)
    raw = bytearray(path.read_bytes())
    raw[-5] ^= 0x40
    path.write_bytes(bytes(raw))
    with pytest.raises(CheckpointError, match="hash"):
        load_checkpoint(path)


def test_metadata_tampering_refused(tmp_path, ckpt):
    path = tmp_path / "m.safetensors"
    save_checkpoint(path, ckpt)
    raw = path.read_bytes()
    tampered = raw.replace(rb'\"seed\":3', rb'\"seed\":4', 1)
    assert tampered != raw
    path.write_bytes(tampered)
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


@pytest.mark.parametrize("payload", [b"", b"not a checkpoint at all"])
def test_garbage_refused(tmp_path, payload):
    path = tmp_path / "x.safetensors"
    path.write_bytes(payload)
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "missing")


def test_save_rejects_wrong_shapes(tmp_path, ckpt):
    bad = Checkpoint(init_params(ModelConfig(5, 3, layers=0, hidden=4, heads=1, ffn_dim=4), 0), ckpt.model_config,
                     ckpt.train_config, ckpt.word_vocab, ckpt.emoji_vocab)
    with pytest.raises(ValueError):
        save_checkpoint(tmp_path / "m", bad)
    assert np.isfinite(ckpt.params.flatten()).all()

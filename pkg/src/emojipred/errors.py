"""Exception hierarchy. Each class carries the category the CLI reports."""


class EmojiPredError(Exception):
    category = "internal"


class ConfigError(EmojiPredError, ValueError):
    category = "config"


class VocabularyError(EmojiPredError, ValueError):
    category = "vocabulary"


class DatasetError(EmojiPredError, ValueError):
    category = "dataset"


class DimensionError(EmojiPredError, ValueError):
    category = "dimension"


class NumericError(EmojiPredError, ArithmeticError):
    category = "numeric"


class CheckpointError(EmojiPredError, ValueError):
    category = "checkpoint"

"""Emoji prediction toolkit: Unicode emoji extraction, heuristic dataset
construction, a small numpy transformer classifier and evaluation metrics."""

__version__ = "0.1.0"

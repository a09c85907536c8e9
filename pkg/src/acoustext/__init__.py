"""Streaming spoken-language identification with acoustic + ASR-text fusion."""

__version__ = "0.1.0"

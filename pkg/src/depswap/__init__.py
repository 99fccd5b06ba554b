"""Phrase-based translation with sparse dependency word-pair reordering features."""

__version__ = "0.1.0"

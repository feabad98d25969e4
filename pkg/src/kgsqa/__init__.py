"""Simple question answering over a knowledge graph with zero-shot relation prediction."""

__version__ = "0.1.0"

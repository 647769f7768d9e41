"""Penalty-based bilevel gradient descent toolkit."""

__version__ = "0.1.0"

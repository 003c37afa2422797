"""Probabilistic binary session types: parsing, checking, analysis, execution."""

__version__ = "0.1.0"

"""Hierarchical stroke-order / touch trajectory learning and replay."""

__version__ = "0.1.0"

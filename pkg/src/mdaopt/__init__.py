"""Modernized dual averaging and companion first-order methods."""

__version__ = "0.1.0"

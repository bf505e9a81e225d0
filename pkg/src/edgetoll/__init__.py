"""Testbed for toll collection on shared edge computing via payment channels."""

__version__ = "0.1.0"

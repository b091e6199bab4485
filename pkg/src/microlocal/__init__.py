"""Numerical microlocal analysis for the flat wave operator."""

__version__ = "0.1.0"

"""Finite-depth almost continuous orbit equivalence for non-singular odometers."""

__version__ = "0.1.0"

"""Entropy metric on the polynomial shift locus via metric rose graphs."""

__version__ = "0.1.0"

"""Randomised near-perfect matchings in near-regular multihypergraphs."""

__version__ = "0.1.0"

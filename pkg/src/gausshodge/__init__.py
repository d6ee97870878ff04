"""Gaussian-weighted discrete Hodge theory on surfaces and Morse indices of self-shrinkers."""

__version__ = "0.1.0"

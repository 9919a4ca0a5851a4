"""Windowed Kolmogorov-complexity estimation, complexity maps and LDA typing."""

__version__ = "0.1.0"

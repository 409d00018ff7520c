"""Sparse-group LASSO for mixed-frequency (MIDAS) time-series regressions."""

__version__ = "0.1.0"

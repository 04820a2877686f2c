"""Attention-based short-term load forecasting."""

__version__ = "0.1.0"

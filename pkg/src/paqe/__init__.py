"""Prediction-aware quality enhancement for a toy block-based video codec."""

__version__ = "0.1.0"

"""Quantization effects on a first-order two-sensor differential microphone array."""
__version__ = "0.1.0"

"""Quantization entropy of white Lévy noise: sampling, estimation, prediction and coding."""

__version__ = "0.1.0"

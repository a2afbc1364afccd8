"""Convolutional-code decoding lab: Viterbi baseline and a U-Net decoder."""

__version__ = "0.1.0"

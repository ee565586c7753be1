"""Mask-conditioned content-aware image retargeting.

A generator with Fourier-convolution residual blocks takes a six-channel
input (the image plus a mask showing the object placed on a white canvas of
the desired output size) and produces the retargeted image. Training pairs
are synthesized by resizing and cropping originals, which serve as ground
truth.
"""
from .imaging import Rect
from .masks import RetargetSpec

__version__ = "0.1.0"
__all__ = ["Rect", "RetargetSpec", "__version__"]

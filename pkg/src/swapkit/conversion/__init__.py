"""Conversion phase: swap prediction, color harmonization, paste-back.

color: statistics-matching transfers (RCT in CIELAB, IDT in RGB).
poisson: seamless gradient-domain compositing via conjugate gradient.
convert: the per-frame pipeline and the order-preserving batch driver.
"""

from .color import ColorError, idt_transfer, rct_transfer
from .poisson import PoissonError, poisson_blend
from .convert import (ConvertConfig, ConvertError, FrameJob, FrameResult,
                      convert_frame, convert_sequence)

__all__ = [
    "ColorError", "rct_transfer", "idt_transfer",
    "PoissonError", "poisson_blend",
    "ConvertConfig", "ConvertError", "FrameJob", "FrameResult",
    "convert_frame", "convert_sequence",
]

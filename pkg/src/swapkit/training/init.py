"""Weight initializers for convolution kernels.

The aware variant builds filters as orthonormal rows of a QR-decomposed
Gaussian matrix over the flattened kernel space: filters are mutually
orthogonal with unit norm, so a conv layer preserves the variance of
unit-variance input. When there are more filters than the kernel space has
dimensions, orthogonality is impossible and a variance-matched Gaussian is
used instead.
"""

from __future__ import annotations

import numpy as np


def _check_conv_shape(shape) -> tuple[int, int]:
    shape = tuple(int(s) for s in shape)
    if len(shape) != 4 or min(shape) < 1:
        raise ValueError(f"expected a 4-d conv weight shape, got {shape}")
    c_out, c_in, kh, kw = shape
    return c_out, c_in * kh * kw


def scaled_gaussian_init(shape, rng: np.random.Generator) -> np.ndarray:
    """Gaussian filters with std 1/sqrt(fan_in): unit output variance."""
    _, fan_in = _check_conv_shape(shape)
    return rng.standard_normal(shape) / np.sqrt(fan_in)


def cai_init(shape, rng: np.random.Generator) -> np.ndarray:
    """Orthonormal conv filters (QR basis), Gaussian fallback when the
    filter count exceeds the flattened kernel dimension."""
    c_out, basis = _check_conv_shape(shape)
    if c_out > basis:
        return scaled_gaussian_init(shape, rng)
    g = rng.standard_normal((basis, c_out))
    q, r = np.linalg.qr(g)
    # fix the QR sign ambiguity so the distribution is symmetric
    q = q * np.sign(np.diag(r))
    return np.ascontiguousarray(q.T).reshape(shape)

"""Identity recovery from rendered pixels.

Given a frame and its known per-frame state, estimate the IdentityParams
that drew it by nonlinear least squares over re-rendered candidates. This
is the identity oracle: swap quality is judged by whose identity a
converted face fits better, without any learned recognizer.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import least_squares

from .render import IDENTITY_RANGES, IdentityParams, StateParams, render

VECTOR_FIELDS = ("axes_ratio", "eye_spacing", "eye_size",
                 "nose_length", "mouth_width")


def _bounds():
    lo, hi = [], []
    for name in VECTOR_FIELDS:
        a, b = IDENTITY_RANGES[name]
        lo.append(a)
        hi.append(b)
    for name in ("skin", "feature"):
        a, b = IDENTITY_RANGES[name]
        lo += [a] * 3
        hi += [b] * 3
    return np.array(lo), np.array(hi)


def identity_to_vector(identity: IdentityParams) -> np.ndarray:
    vals = [getattr(identity, f) for f in VECTOR_FIELDS]
    return np.array(vals + list(identity.skin) + list(identity.feature))


def identity_from_vector(vec) -> IdentityParams:
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (11,):
        raise ValueError(f"identity vector must have 11 entries, got {vec.shape}")
    lo, hi = _bounds()
    vec = np.clip(vec, lo, hi)
    kw = dict(zip(VECTOR_FIELDS, (float(v) for v in vec[:5])))
    return IdentityParams(skin=tuple(vec[5:8]), feature=tuple(vec[8:11]), **kw)


def identity_distance(a: IdentityParams, b: IdentityParams) -> float:
    """Mean per-parameter gap, each normalized by its range width."""
    va, vb = identity_to_vector(a), identity_to_vector(b)
    lo, hi = _bounds()
    return float(np.mean(np.abs(va - vb) / (hi - lo)))


def fit_identity(image: np.ndarray, state: StateParams, mask=None,
                 x0: IdentityParams | None = None) -> IdentityParams:
    """Least-squares identity estimate for one frame of known state.

    image is (size, size, 3) in [0, 1]. mask (same spatial shape, [0, 1])
    restricts the residual to a region, e.g. the pasted face; outside
    pixels then contribute nothing. Finite-difference steps ride on the
    anti-aliased rasterization, which varies smoothly with the shape
    parameters.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3 or image.shape[0] != image.shape[1]:
        raise ValueError(f"expected square (size, size, 3) image, got {image.shape}")
    size = image.shape[0]
    weights = None
    if mask is not None:
        mask = np.asarray(mask, dtype=np.float64)
        if mask.shape != image.shape[:2]:
            raise ValueError(f"mask shape {mask.shape} does not match image")
        if mask.max() <= 0:
            raise ValueError("mask is empty")
        weights = mask[:, :, None]
    lo, hi = _bounds()
    start = identity_to_vector(x0) if x0 is not None else 0.5 * (lo + hi)

    def residual(vec):
        cand, _, _ = render(identity_from_vector(vec), state, size)
        diff = cand - image
        if weights is not None:
            diff = diff * weights
        return diff.ravel()

    sol = least_squares(residual, start, bounds=(lo, hi),
                        diff_step=0.03, xtol=1e-10, ftol=1e-10, max_nfev=400)
    return identity_from_vector(sol.x)

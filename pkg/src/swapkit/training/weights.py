"""Per-pixel loss weight maps derived from landmarks.

The eye polygons (points 36-41 and 42-47) get a higher weight than the
rest of the face so the trainer spends capacity where viewers look first.
"""

from __future__ import annotations

import numpy as np
from PIL import Image, ImageDraw
from scipy.ndimage import binary_dilation

from swapkit.geometry import LEFT_EYE, RIGHT_EYE, N_LANDMARKS

DILATE_PX = 2


def eye_weight_map(landmarks: np.ndarray, size: int, eye_weight: float) -> np.ndarray:
    """Weight map of shape (size, size): eye_weight inside the dilated eye
    polygons, 1 elsewhere. Landmarks are pixel coordinates in the aligned
    crop. eye_weight 1 gives a uniform map without rasterizing.
    """
    pts = np.asarray(landmarks, dtype=np.float64)
    if pts.shape != (N_LANDMARKS, 2):
        raise ValueError(f"expected ({N_LANDMARKS}, 2) landmarks, got {pts.shape}")
    if size < 4:
        raise ValueError(f"size too small: {size}")
    if eye_weight < 0:
        raise ValueError(f"eye_weight must be >= 0, got {eye_weight}")
    out = np.ones((size, size), dtype=np.float32)
    if eye_weight == 1.0:
        return out
    im = Image.new("L", (size, size), 0)
    draw = ImageDraw.Draw(im)
    for region in (LEFT_EYE, RIGHT_EYE):
        poly = [(float(x), float(y)) for x, y in pts[region]]
        draw.polygon(poly, fill=1)
    mask = np.asarray(im, dtype=bool)
    if mask.any():
        mask = binary_dilation(mask, iterations=DILATE_PX)
    out[mask] = eye_weight
    return out


def batch_weight_maps(landmarks_batch: np.ndarray, size: int, eye_weight: float) -> np.ndarray:
    """(n, 68, 2) landmark batch -> (n, size, size) f32 weight maps."""
    lm = np.asarray(landmarks_batch, dtype=np.float64)
    if lm.ndim != 3 or lm.shape[1:] != (N_LANDMARKS, 2):
        raise ValueError(f"expected (n, {N_LANDMARKS}, 2), got {lm.shape}")
    return np.stack([eye_weight_map(p, size, eye_weight) for p in lm])

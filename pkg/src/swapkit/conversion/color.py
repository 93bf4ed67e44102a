"""Color distribution transfer between face crops.

Both operations compute statistics over the mask interior only (the face
region); the mapping is then applied to the whole image, since whatever
falls outside the mask is discarded by compositing anyway.
"""

from __future__ import annotations

import numpy as np

from swapkit.imgcore import as_image, clamp01, lab_to_rgb, rgb_to_lab

SIGMA_FLOOR = 1e-6
INTERIOR_THRESHOLD = 0.5


class ColorError(ValueError):
    pass


def _interior(img, ref, mask):
    img = as_image(img, channels=3)
    ref = as_image(ref, channels=3)
    if img.shape != ref.shape:
        raise ColorError(f"image shapes differ: {img.shape} vs {ref.shape}")
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != img.shape[:2]:
        raise ColorError(f"mask shape {mask.shape} does not match {img.shape[:2]}")
    sel = mask > INTERIOR_THRESHOLD
    if not sel.any():
        raise ColorError("mask has no interior pixels")
    return img, ref, sel


def rct_transfer(src_face, ref_face, mask):
    """Match the face's CIELAB channel statistics to the reference.

    Per channel: out = (in - mu_src) * (sigma_ref / sigma_src) + mu_ref,
    with moments taken over mask-interior pixels and sigma_src floored to
    avoid blowups on flat regions. Returns RGB clamped to [0, 1].
    """
    img, ref, sel = _interior(src_face, ref_face, mask)
    lab = rgb_to_lab(img)
    lab_ref = rgb_to_lab(ref)
    mu_s = lab[sel].mean(axis=0)
    sd_s = np.maximum(lab[sel].std(axis=0), SIGMA_FLOOR)
    mu_r = lab_ref[sel].mean(axis=0)
    sd_r = lab_ref[sel].std(axis=0)
    out = (lab - mu_s) * (sd_r / sd_s) + mu_r
    return clamp01(lab_to_rgb(out))


def _random_rotation(rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def idt_transfer(src_face, ref_face, mask, iterations: int = 30, seed: int = 0):
    """Iterative distribution transfer in RGB.

    Each round rotates both interior pixel clouds by a seeded random 3x3
    rotation, matches the three 1-D marginals by sorted-quantile mapping,
    and rotates back. Repetition drives the full 3-D distribution toward
    the reference. Pixels outside the mask pass through unchanged.
    """
    if iterations < 1:
        raise ColorError(f"iterations must be >= 1, got {iterations}")
    img, ref, sel = _interior(src_face, ref_face, mask)
    x = img[sel]
    y = ref[sel]
    n, m = len(x), len(y)
    rng = np.random.default_rng(seed)
    pos_x = np.linspace(0.0, 1.0, n)
    pos_y = np.linspace(0.0, 1.0, m)
    for _ in range(iterations):
        rot = _random_rotation(rng)
        xp = x @ rot.T
        yp = y @ rot.T
        for axis in range(3):
            order = np.argsort(xp[:, axis], kind="stable")
            matched = np.interp(pos_x, pos_y, np.sort(yp[:, axis]))
            xp[order, axis] = matched
        x = xp @ rot
    out = img.copy()
    out[sel] = x
    return clamp01(out)

"""Deterministic vector renderer for synthetic head footage.

The head is a solid ellipsoid; its silhouette under rotation and
orthographic projection is the ellipse given by the Schur complement of
the rotated quadric's z-block. Facial features are filled polygons whose
vertices come from the shared 3D landmark rig, morphed per identity and
state, so the reported landmarks are exactly what was drawn. Everything
is rasterized at 4x resolution and box-averaged down for anti-aliasing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image, ImageDraw

from swapkit.geometry import (EulerAngles, LEFT_EYE, RIGHT_EYE, canonical_rig3d,
                              rig_metadata, rotation_from_euler)

SUPERSAMPLE = 4
WORLD_HALF = 1.875            # frame half-extent in rig units; fits any pose
MOUTH_OPEN_SHIFT = 0.18       # world-unit drop of the inner lower lip at openness 1
BROW_WIDTH = 0.07             # drawn brow stroke thickness, world units
INTERIOR_DARKEN = 0.45        # mouth-interior color = feature color * this

NOSE = slice(27, 36)
OUTER_LIP = slice(48, 60)
INNER_LIP = slice(60, 68)
OUTER_LOWER = slice(55, 60)
INNER_LOWER = slice(65, 68)
LEFT_BROW = slice(17, 22)
RIGHT_BROW = slice(22, 27)

IDENTITY_RANGES = {
    "axes_ratio": (0.85, 1.15),
    "eye_spacing": (0.85, 1.15),
    "eye_size": (0.80, 1.25),
    "nose_length": (0.85, 1.20),
    "mouth_width": (0.80, 1.20),
    "skin": (0.30, 0.90),      # applies to each RGB channel
    "feature": (0.05, 0.50),
}

STATE_RANGES = {
    "yaw": (-40.0, 40.0),
    "pitch": (-25.0, 25.0),
    "roll": (-20.0, 20.0),
    "mouth_open": (0.0, 1.0),
    "eye_open": (0.0, 1.0),
    "illumination": (0.6, 1.4),
}


class DatasimError(ValueError):
    pass


def _check_range(value, name, lo, hi):
    if not (lo <= value <= hi):
        raise DatasimError(f"{name} = {value} outside [{lo}, {hi}]")


@dataclass(frozen=True)
class IdentityParams:
    """Who the head is: shape multipliers (1 = the neutral rig) and colors."""

    axes_ratio: float = 1.0       # vertical stretch of head and features
    eye_spacing: float = 1.0
    eye_size: float = 1.0
    nose_length: float = 1.0
    mouth_width: float = 1.0
    skin: tuple = (0.75, 0.60, 0.50)
    feature: tuple = (0.25, 0.15, 0.12)

    def __post_init__(self):
        for name in ("axes_ratio", "eye_spacing", "eye_size",
                     "nose_length", "mouth_width"):
            lo, hi = IDENTITY_RANGES[name]
            _check_range(getattr(self, name), name, lo, hi)
        for name in ("skin", "feature"):
            cols = getattr(self, name)
            if len(cols) != 3:
                raise DatasimError(f"{name} must be an RGB triple")
            lo, hi = IDENTITY_RANGES[name]
            for v in cols:
                _check_range(v, name, lo, hi)

    def to_dict(self) -> dict:
        return {"axes_ratio": self.axes_ratio, "eye_spacing": self.eye_spacing,
                "eye_size": self.eye_size, "nose_length": self.nose_length,
                "mouth_width": self.mouth_width, "skin": list(self.skin),
                "feature": list(self.feature)}

    @classmethod
    def from_dict(cls, d: dict) -> "IdentityParams":
        return cls(axes_ratio=d["axes_ratio"], eye_spacing=d["eye_spacing"],
                   eye_size=d["eye_size"], nose_length=d["nose_length"],
                   mouth_width=d["mouth_width"], skin=tuple(d["skin"]),
                   feature=tuple(d["feature"]))


@dataclass(frozen=True)
class StateParams:
    """Per-frame pose, expression, and lighting."""

    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0
    mouth_open: float = 0.0
    eye_open: float = 1.0
    illumination: float = 1.0
    background_seed: int = 0

    def __post_init__(self):
        for name, (lo, hi) in STATE_RANGES.items():
            _check_range(getattr(self, name), name, lo, hi)
        if self.background_seed < 0:
            raise DatasimError("background_seed must be nonnegative")

    def to_dict(self) -> dict:
        return {"yaw": self.yaw, "pitch": self.pitch, "roll": self.roll,
                "mouth_open": self.mouth_open, "eye_open": self.eye_open,
                "illumination": self.illumination,
                "background_seed": self.background_seed}

    @classmethod
    def from_dict(cls, d: dict) -> "StateParams":
        return cls(**d)


def morph_rig(identity: IdentityParams, state: StateParams) -> np.ndarray:
    """Neutral rig -> identity/state-specific 3D points (before rotation)."""
    pts = canonical_rig3d().copy()
    for region in (LEFT_EYE, RIGHT_EYE):
        eye = pts[region]
        center = eye.mean(axis=0)
        eye[:, :2] = center[:2] + identity.eye_size * (eye[:, :2] - center[:2])
        eye[:, 1] = center[1] + state.eye_open * (eye[:, 1] - center[1])
        eye[:, 0] += (identity.eye_spacing - 1.0) * center[0]
        pts[region] = eye
    bridge_y = pts[27, 1]
    pts[NOSE, 1] = bridge_y + identity.nose_length * (pts[NOSE, 1] - bridge_y)
    mouth_cx = pts[48:68, 0].mean()
    pts[48:68, 0] = mouth_cx + identity.mouth_width * (pts[48:68, 0] - mouth_cx)
    drop = MOUTH_OPEN_SHIFT * state.mouth_open
    pts[OUTER_LOWER, 1] += 0.5 * drop
    pts[INNER_LOWER, 1] += drop
    pts[:, 1] *= identity.axes_ratio
    return pts


def _project(points3: np.ndarray, rot: np.ndarray, size: int, scale_mul: int = 1):
    """Rig units -> pixel coordinates at size (or size*scale_mul)."""
    s = scale_mul * size / (2.0 * WORLD_HALF)
    c = (scale_mul * size - 1) / 2.0
    p = points3 @ rot.T
    return c + s * p[:, :2]


def _head_silhouette(rot, axes, size4):
    """Anti-aliased interior test of the projected ellipsoid.

    The solid ellipsoid x^T D x <= 1 rotates to y^T Q y <= 1 with
    Q = R D R^T; eliminating z (Schur complement of Q's z-entry) leaves
    the silhouette ellipse u^T S u <= 1 in the projection plane.
    """
    d = np.diag(1.0 / np.asarray(axes, dtype=np.float64) ** 2)
    q = rot @ d @ rot.T
    s_mat = q[:2, :2] - np.outer(q[:2, 2], q[2, :2]) / q[2, 2]
    scale = size4 / (2.0 * WORLD_HALF)
    c = (size4 - 1) / 2.0
    coords = (np.arange(size4, dtype=np.float64) - c) / scale
    xx = coords[None, :]
    yy = coords[:, None]
    quad = (s_mat[0, 0] * xx * xx + 2.0 * s_mat[0, 1] * xx * yy
            + s_mat[1, 1] * yy * yy)
    return quad <= 1.0


def _background(seed: int, size4: int) -> np.ndarray:
    """Smooth sinusoidal color field; same seed, same field."""
    rng = np.random.default_rng(seed)
    c = (size4 - 1) / 2.0
    u = (np.arange(size4, dtype=np.float64) - c) / size4
    xx = u[None, :]
    yy = u[:, None]
    img = np.empty((size4, size4, 3))
    for ch in range(3):
        fx, fy = rng.uniform(1.0, 4.0, 2)
        phase = rng.uniform(0, 2 * np.pi)
        level = rng.uniform(0.35, 0.55)
        img[:, :, ch] = level + 0.18 * np.sin(2 * np.pi * (fx * xx + fy * yy) + phase)
    return img


def _polygon_mask(draw_ops, size4: int) -> np.ndarray:
    im = Image.new("L", (size4, size4), 0)
    draw = ImageDraw.Draw(im)
    for kind, arg in draw_ops:
        if kind == "poly":
            draw.polygon([tuple(p) for p in arg], fill=255)
        else:
            pts, width = arg
            draw.line([tuple(p) for p in pts], fill=255, width=width)
    return np.asarray(im, dtype=np.float64) / 255.0


def render(identity: IdentityParams, state: StateParams, size: int):
    """Draw one frame. Returns (image, landmarks, mask).

    image: (size, size, 3) floats in [0, 1]; landmarks: (68, 2) pixel
    coordinates of the morphed rig under the same projection; mask:
    (size, size) head-region coverage in [0, 1] (anti-aliased edges).
    """
    if size < 16:
        raise DatasimError(f"size must be >= 16, got {size}")
    size4 = size * SUPERSAMPLE
    rot = rotation_from_euler(EulerAngles(state.yaw, state.pitch, state.roll))
    pts3 = morph_rig(identity, state)
    lm = _project(pts3, rot, size)
    lm4 = _project(pts3, rot, size, SUPERSAMPLE)

    a, b, c_ax = rig_metadata()["head_axes"]
    head4 = _head_silhouette(rot, (a, b * identity.axes_ratio, c_ax), size4)

    stroke = max(1, int(round(BROW_WIDTH * size4 / (2.0 * WORLD_HALF))))
    features4 = _polygon_mask([
        ("poly", lm4[OUTER_LIP]),
        ("poly", np.concatenate([lm4[27:28], lm4[31:36]])),
        ("poly", lm4[LEFT_EYE]),
        ("poly", lm4[RIGHT_EYE]),
        ("line", (lm4[LEFT_BROW], stroke)),
        ("line", (lm4[RIGHT_BROW], stroke)),
    ], size4)
    interior4 = _polygon_mask([("poly", lm4[INNER_LIP])], size4)

    img4 = _background(state.background_seed, size4)
    skin = np.asarray(identity.skin, dtype=np.float64)
    feature = np.asarray(identity.feature, dtype=np.float64)
    img4 = np.where(head4[:, :, None], skin, img4)
    # rig points sit inside the solid, so their projections stay inside the
    # silhouette at any pose; clipping to head4 only trims brow-stroke and
    # anti-aliasing spill at the rim
    feat_alpha = (features4 * head4)[:, :, None]
    img4 = img4 * (1.0 - feat_alpha) + feature * feat_alpha
    int_alpha = (interior4 * head4)[:, :, None]
    img4 = img4 * (1.0 - int_alpha) + (INTERIOR_DARKEN * feature) * int_alpha
    img4 *= state.illumination

    img = img4.reshape(size, SUPERSAMPLE, size, SUPERSAMPLE, 3).mean(axis=(1, 3))
    mask = head4.astype(np.float64).reshape(
        size, SUPERSAMPLE, size, SUPERSAMPLE).mean(axis=(1, 3))
    return np.clip(img, 0.0, 1.0), lm, mask

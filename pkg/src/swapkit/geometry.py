"""Landmark geometry: similarity alignment, smoothing, and pose recovery.

Landmarks follow the 68-point convention (jaw 0-16, brows 17-26, nose 27-35,
eyes 36-47, outer lip 48-59, inner lip 60-67) in image coordinates, x right
and y down. Two templates ship as embedded data: a canonical 2D layout in the
unit square and the 3D rig it was projected from. The synthetic face
generator renders from the same rig, so alignment and pose estimates agree
with it by construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import imgcore

N_LANDMARKS = 68

# fraction of the template's unit square that the aligned crop keeps;
# smaller coverage zooms in on the face centre
COVERAGE = {"half_face": 0.55, "full_face": 0.75, "whole_face": 1.0}

# landmark index ranges used by weight maps and feature rendering
LEFT_EYE = slice(36, 42)
RIGHT_EYE = slice(42, 48)


class GeometryError(ValueError):
    pass


def validate_landmarks(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape != (N_LANDMARKS, 2):
        raise GeometryError(f"expected ({N_LANDMARKS}, 2) landmarks, got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise GeometryError("landmarks contain non-finite values")
    return pts


def _load_data(name: str) -> dict:
    text = resources.files("swapkit.data").joinpath(name).read_text()
    return json.loads(text)


def canonical_template2d() -> np.ndarray:
    """The 68-point layout in the unit square, row per landmark."""
    return validate_landmarks(_load_data("landmarks2d.json")["points"])


def canonical_rig3d() -> np.ndarray:
    """The 3D rig behind the 2D template: (68, 3), x right, y down, z out."""
    pts = np.asarray(_load_data("rig3d.json")["points"], dtype=np.float64)
    if pts.shape != (N_LANDMARKS, 3):
        raise GeometryError(f"rig data has shape {pts.shape}")
    return pts


def rig_metadata() -> dict:
    """Head ellipsoid axes and the framing half-extent of the 2D template."""
    data = _load_data("rig3d.json")
    return {"half_extent": float(data["half_extent"]),
            "head_axes": tuple(float(a) for a in data["head_axes"])}


# ---------------------------------------------------------------------------
# similarity transforms

@dataclass(frozen=True)
class SimilarityTransform:
    """Maps points as y = scale * rotation @ x + translation."""

    scale: float
    rotation: np.ndarray    # (2, 2), proper orthogonal
    translation: np.ndarray  # (2,)

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64)
        tra = np.asarray(self.translation, dtype=np.float64)
        if rot.shape != (2, 2) or tra.shape != (2,):
            raise GeometryError("rotation must be (2, 2) and translation (2,)")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise GeometryError(f"scale must be positive, got {self.scale}")
        if not np.allclose(rot @ rot.T, np.eye(2), atol=1e-9):
            raise GeometryError("rotation is not orthogonal")
        if np.linalg.det(rot) < 0:
            raise GeometryError("rotation must not include a reflection")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tra)

    def matrix(self) -> np.ndarray:
        m = np.empty((2, 3), dtype=np.float64)
        m[:, :2] = self.scale * self.rotation
        m[:, 2] = self.translation
        return m

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ (self.scale * self.rotation).T + self.translation

    def inverse(self) -> "SimilarityTransform":
        inv_rot = self.rotation.T
        inv_scale = 1.0 / self.scale
        inv_tra = -inv_scale * (inv_rot @ self.translation)
        return SimilarityTransform(inv_scale, inv_rot, inv_tra)

    def angle_degrees(self) -> float:
        return math.degrees(math.atan2(self.rotation[1, 0], self.rotation[0, 0]))

    def to_json_dict(self, mode: str, out_size: int) -> dict:
        return {
            "scale": float(self.scale),
            "rotation": [float(v) for v in self.rotation.ravel()],
            "translation": [float(v) for v in self.translation],
            "mode": mode,
            "out_size": int(out_size),
        }


def transform_from_json_dict(d: dict) -> SimilarityTransform:
    rot = np.asarray(d["rotation"], dtype=np.float64).reshape(2, 2)
    tra = np.asarray(d["translation"], dtype=np.float64)
    return SimilarityTransform(float(d["scale"]), rot, tra)


def umeyama(src_points, dst_points) -> SimilarityTransform:
    """Least-squares similarity aligning src onto dst.

    Closed form via the SVD of the cross-covariance, with the determinant
    correction that keeps the rotation reflection-free. Degenerate inputs
    (fewer than two points, or either set collapsed to a point) raise.
    """
    src = np.asarray(src_points, dtype=np.float64)
    dst = np.asarray(dst_points, dtype=np.float64)
    if src.ndim != 2 or src.shape[1] != 2 or src.shape != dst.shape:
        raise GeometryError(f"point sets must share shape (n, 2), got {src.shape} and {dst.shape}")
    n = src.shape[0]
    if n < 2:
        raise GeometryError("need at least two point pairs")

    mu_src = src.mean(axis=0)
    mu_dst = dst.mean(axis=0)
    src_c = src - mu_src
    dst_c = dst - mu_dst
    var_src = float((src_c ** 2).sum() / n)
    if var_src <= 0.0:
        raise GeometryError("source points are coincident")

    cov = dst_c.T @ src_c / n
    u, d, vt = np.linalg.svd(cov)
    s = np.ones(2)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        s[-1] = -1.0
    rot = u @ np.diag(s) @ vt
    scale = float((d * s).sum() / var_src)
    if scale <= 0.0:
        raise GeometryError("destination points are coincident or degenerate")
    tra = mu_dst - scale * rot @ mu_src
    return SimilarityTransform(scale, rot, tra)


# ---------------------------------------------------------------------------
# alignment

@dataclass(frozen=True)
class AlignmentTemplate:
    mode: str
    coverage: float
    points: np.ndarray   # canonical layout in the unit square

    def crop_points(self, out_size: int) -> np.ndarray:
        """Template landmarks in pixel coordinates of an out_size crop."""
        spread = (self.points - 0.5) / self.coverage + 0.5
        return spread * (out_size - 1)


def alignment_template(mode: str) -> AlignmentTemplate:
    if mode not in COVERAGE:
        raise GeometryError(f"unknown mode {mode!r}, expected one of {sorted(COVERAGE)}")
    return AlignmentTemplate(mode, COVERAGE[mode], canonical_template2d())


def align_face(image, landmarks, mode: str = "full_face", out_size: int = 256):
    """Warp a frame so its landmarks land on the canonical layout.

    Returns (aligned_image, transform) where the transform maps frame
    coordinates to crop coordinates; its inverse pastes the crop back.
    """
    if out_size < 16:
        raise GeometryError(f"out_size must be at least 16, got {out_size}")
    lms = validate_landmarks(landmarks)
    template = alignment_template(mode)
    t = umeyama(lms, template.crop_points(out_size))
    m = t.inverse().matrix()   # crop pixel -> frame pixel, as warp expects
    aligned = imgcore.warp_affine(image, m, out_size, out_size)
    return aligned, t


# ---------------------------------------------------------------------------
# temporal smoothing

def smooth_landmarks(sequence, window: int = 5) -> list:
    """Gaussian-weighted temporal average of a landmark sequence.

    sigma = window / 6 so the window spans about three sigma each side. Near
    the ends the window shrinks symmetrically, which keeps the weights
    normalized without reflecting or padding the sequence. window=1 returns
    copies unchanged.
    """
    if window < 1 or window % 2 == 0:
        raise GeometryError(f"window must be odd and positive, got {window}")
    seq = [validate_landmarks(p) for p in sequence]
    if window == 1 or len(seq) <= 1:
        return [p.copy() for p in seq]
    stack = np.stack(seq)
    n = len(seq)
    radius = window // 2
    sigma = window / 6.0
    offs = np.arange(-radius, radius + 1)
    base = np.exp(-0.5 * (offs / sigma) ** 2)
    out = []
    for i in range(n):
        m = min(radius, i, n - 1 - i)
        w = base[radius - m:radius + m + 1]
        w = w / w.sum()
        out.append(np.tensordot(w, stack[i - m:i + m + 1], axes=1))
    return out


# ---------------------------------------------------------------------------
# pose

@dataclass(frozen=True)
class EulerAngles:
    """Head pose in degrees: intrinsic yaw (y), pitch (x), roll (z).

    Axes follow image coordinates (x right, y down, z toward the viewer), so
    the rotation applied to rig points is R = Ry(yaw) @ Rx(pitch) @ Rz(roll).
    """

    yaw: float
    pitch: float
    roll: float

    def as_array(self) -> np.ndarray:
        return np.array([self.yaw, self.pitch, self.roll], dtype=np.float64)


def rotation_from_euler(angles: EulerAngles) -> np.ndarray:
    y, x, z = (math.radians(v) for v in (angles.yaw, angles.pitch, angles.roll))
    cy, sy = math.cos(y), math.sin(y)
    cx, sx = math.cos(x), math.sin(x)
    cz, sz = math.cos(z), math.sin(z)
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return ry @ rx @ rz


def euler_from_rotation(rot: np.ndarray) -> EulerAngles:
    r = np.asarray(rot, dtype=np.float64)
    pitch = math.asin(np.clip(-r[1, 2], -1.0, 1.0))
    if abs(r[1, 2]) < 1.0 - 1e-12:
        yaw = math.atan2(r[0, 2], r[2, 2])
        roll = math.atan2(r[1, 0], r[1, 1])
    else:
        # gimbal lock: pitch at +-90 degrees, split is arbitrary; put it all in yaw
        yaw = math.atan2(-r[2, 0], r[0, 0])
        roll = 0.0
    return EulerAngles(math.degrees(yaw), math.degrees(pitch), math.degrees(roll))


def euler_from_landmarks(landmarks, rig3d: np.ndarray | None = None) -> EulerAngles:
    """Recover head pose from 2D landmarks by a scaled-orthographic fit.

    Solves for the 2x3 projection P minimizing ||P X - x||^2 over centred
    point sets, then orthonormalizes its rows: the SVD projection onto
    scaled rotations. The third row is the cross product, and the Euler
    factorization above decodes the angles.
    """
    lms = validate_landmarks(landmarks)
    rig = canonical_rig3d() if rig3d is None else np.asarray(rig3d, dtype=np.float64)
    if rig.shape != (lms.shape[0], 3):
        raise GeometryError(f"rig shape {rig.shape} does not match landmarks")

    x2 = (lms - lms.mean(axis=0)).T            # (2, n)
    x3 = (rig - rig.mean(axis=0)).T            # (3, n)
    gram = x3 @ x3.T
    if np.linalg.matrix_rank(gram) < 3:
        raise GeometryError("rig points are degenerate (coplanar or collinear)")
    p = x2 @ x3.T @ np.linalg.inv(gram)        # (2, 3)
    u, _, vt = np.linalg.svd(p, full_matrices=False)
    r01 = u @ vt                               # first two rows of the rotation
    r2 = np.cross(r01[0], r01[1])
    rot = np.vstack([r01, r2])
    return euler_from_rotation(rot)


# ---------------------------------------------------------------------------
# landmark file format

def read_landmarks(path) -> np.ndarray:
    with open(path) as f:
        data = json.load(f)
    return validate_landmarks(data["points"])


def write_landmarks(path, landmarks) -> None:
    lms = validate_landmarks(landmarks)
    with open(path, "w") as f:
        json.dump({"points": [[float(x), float(y)] for x, y in lms]}, f)

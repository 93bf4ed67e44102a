"""Quantitative comparison of paired frame sequences.

Three per-frame scores: SSIM between the images, mean Euclidean distance
between the 68 landmarks, and Euclidean distance between landmark-derived
Euler angles. evaluate() pairs two directory trees by basename, samples
frames uniformly over time, and aggregates mean and standard deviation at
both the frame and the video level. Identity-verification and perceptual
columns need pretrained networks, so the report carries them as null.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from swapkit import geometry, imgcore
from swapkit.autograd import Tensor
from swapkit.training.losses import SSIM_RADIUS, ssim_map

METRIC_NAMES = ("ssim", "landmark_dist", "pose_dist")


class MetricsError(ValueError):
    pass


def ssim_score(a, b) -> float:
    """Mean SSIM over valid windows; same map the training loss uses."""
    img_a = imgcore.as_image(a)
    img_b = imgcore.as_image(b)
    if img_a.shape != img_b.shape:
        raise MetricsError(f"image shapes differ: {img_a.shape} vs {img_b.shape}")
    side = 2 * SSIM_RADIUS + 1
    if img_a.shape[0] < side or img_a.shape[1] < side:
        raise MetricsError(f"images must be at least {side}x{side} for SSIM")
    ta = Tensor(np.ascontiguousarray(img_a.transpose(2, 0, 1)[None]))
    tb = Tensor(np.ascontiguousarray(img_b.transpose(2, 0, 1)[None]))
    return float(ssim_map(ta, tb).data.mean())


def landmark_distance(a, b) -> float:
    """Mean over the 68 per-point Euclidean distances, in pixels."""
    la = geometry.validate_landmarks(a)
    lb = geometry.validate_landmarks(b)
    return float(np.linalg.norm(la - lb, axis=1).mean())


def _wrap_degrees(d: float) -> float:
    return (d + 180.0) % 360.0 - 180.0


def pose_distance(a: geometry.EulerAngles, b: geometry.EulerAngles) -> float:
    """L2 norm of the per-angle deltas, each wrapped into [-180, 180]."""
    deltas = [_wrap_degrees(a.yaw - b.yaw),
              _wrap_degrees(a.pitch - b.pitch),
              _wrap_degrees(a.roll - b.roll)]
    return float(np.linalg.norm(deltas))


@dataclass
class FrameScore:
    name: str
    ssim: float
    landmark_dist: float
    pose_dist: float

    def values(self) -> dict:
        return {"ssim": self.ssim, "landmark_dist": self.landmark_dist,
                "pose_dist": self.pose_dist}


@dataclass
class AggregateReport:
    sampling: int
    video_count: int
    frame_count: int
    frame_level: dict
    video_level: dict
    per_video: list
    skipped: list = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "sampling": self.sampling,
            "video_count": self.video_count,
            "frame_count": self.frame_count,
            "frame_level": self.frame_level,
            "video_level": self.video_level,
            "per_video": self.per_video,
            "skipped": self.skipped,
            "identity": None,     # needs a pretrained verifier
            "perceptual": None,   # needs a pretrained feature network
        }

    def save_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json_dict(), f, indent=2)

    def table(self) -> str:
        """Aligned text table: one row per metric, mean +- std per level."""
        rows = [("metric", "frames (mean +- std)", "videos (mean +- std)")]
        for m in METRIC_NAMES:
            f = self.frame_level[m]
            v = self.video_level[m]
            rows.append((m,
                         f"{f['mean']:.4f} +- {f['std']:.4f}",
                         f"{v['mean']:.4f} +- {v['std']:.4f}"))
        widths = [max(len(r[i]) for r in rows) for i in range(3)]
        lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip()
                 for r in rows]
        lines.insert(1, "-" * len(lines[0]))
        lines.append(f"frames scored: {self.frame_count}   "
                     f"videos: {self.video_count}   skipped: {len(self.skipped)}")
        return "\n".join(lines)


def _stats(values) -> dict:
    arr = np.asarray(values, dtype=np.float64)
    return {"mean": float(arr.mean()), "std": float(arr.std())}


def _sequence_dirs(root: Path) -> list[tuple[str, Path, Path]]:
    """Find (video name, frames dir, landmarks dir) triples under root.

    Accepts a single sequence (frames/ + landmarks/, or flat PNGs) or a
    directory of such sequences, one per video.
    """
    root = Path(root)
    if not root.is_dir():
        raise MetricsError(f"not a directory: {root}")
    if (root / "frames").is_dir():
        lm = root / "landmarks"
        return [("", root / "frames", lm if lm.is_dir() else root / "frames")]
    if any(root.glob("*.png")):
        return [("", root, root)]
    found = []
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        if (sub / "frames").is_dir():
            lm = sub / "landmarks"
            found.append((sub.name, sub / "frames",
                          lm if lm.is_dir() else sub / "frames"))
        elif any(sub.glob("*.png")):
            found.append((sub.name, sub, sub))
    if not found:
        raise MetricsError(f"no frame sequences under {root}")
    return found


def sample_indices(n: int, sampling: int) -> np.ndarray:
    """Uniform temporal sampling; fewer frames than requested means all."""
    if sampling < 1:
        raise MetricsError(f"sampling must be >= 1, got {sampling}")
    if n <= sampling:
        return np.arange(n)
    return np.unique(np.round(np.linspace(0.0, n - 1, num=sampling)).astype(int))


def _score_pair(name, frame_a, lm_a, frame_b, lm_b) -> FrameScore:
    img_a = imgcore.read_png(frame_a)
    img_b = imgcore.read_png(frame_b)
    pts_a = geometry.read_landmarks(lm_a)
    pts_b = geometry.read_landmarks(lm_b)
    return FrameScore(
        name=name,
        ssim=ssim_score(img_a, img_b),
        landmark_dist=landmark_distance(pts_a, pts_b),
        pose_dist=pose_distance(geometry.euler_from_landmarks(pts_a),
                                geometry.euler_from_landmarks(pts_b)))


def evaluate(dir_a, dir_b, sampling: int = 100, workers: int = 1) -> AggregateReport:
    """Score dir_a against dir_b and aggregate.

    Frames pair by basename within each video; videos pair by directory
    name. A frame missing its counterpart or a landmark file is skipped
    and listed in the report. No scorable pair at all is an error.
    """
    vids_a = dict((n, (f, l)) for n, f, l in _sequence_dirs(Path(dir_a)))
    vids_b = dict((n, (f, l)) for n, f, l in _sequence_dirs(Path(dir_b)))
    names = sorted(set(vids_a) & set(vids_b))
    if not names:
        raise MetricsError("directories share no video names")

    skipped = []
    per_video = []
    all_scores: list[FrameScore] = []
    for vid in names:
        fa, la = vids_a[vid]
        fb, lb = vids_b[vid]
        stems_a = {p.stem: p for p in fa.glob("*.png")}
        stems_b = {p.stem: p for p in fb.glob("*.png")}
        for stem in sorted(set(stems_a) ^ set(stems_b)):
            skipped.append({"video": vid, "frame": stem, "reason": "unpaired frame"})
        jobs = []
        for stem in (sorted(set(stems_a) & set(stems_b))):
            pa = la / f"{stem}.json"
            pb = lb / f"{stem}.json"
            if not pa.is_file() or not pb.is_file():
                skipped.append({"video": vid, "frame": stem,
                                "reason": "missing landmarks"})
                continue
            jobs.append((stem, stems_a[stem], pa, stems_b[stem], pb))
        take = sample_indices(len(jobs), sampling)
        jobs = [jobs[i] for i in take]
        if workers > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                scores = list(pool.map(lambda j: _score_pair(*j), jobs))
        else:
            scores = [_score_pair(*j) for j in jobs]
        if scores:
            per_video.append({
                "name": vid or ".",
                "frames": len(scores),
                **{m: _stats([s.values()[m] for s in scores]) for m in METRIC_NAMES},
            })
            all_scores.extend(scores)

    if not all_scores:
        raise MetricsError("no scorable frame pairs")
    frame_level = {m: _stats([s.values()[m] for s in all_scores])
                   for m in METRIC_NAMES}
    video_level = {m: _stats([v[m]["mean"] for v in per_video])
                   for m in METRIC_NAMES}
    return AggregateReport(sampling=sampling, video_count=len(per_video),
                           frame_count=len(all_scores), frame_level=frame_level,
                           video_level=video_level, per_video=per_video,
                           skipped=skipped)

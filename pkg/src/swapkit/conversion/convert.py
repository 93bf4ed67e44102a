"""Per-frame swap pipeline and the batch driver.

One frame flows: crop the face with the stored alignment transform, run
the model's swap route, intersect predicted and ingested masks, harmonize
color against the aligned target face, erode and feather the mask, warp
face and mask back with the inverse transform, composite, optionally
sharpen inside the mask. Color work happens in aligned space, before
paste-back, so transfers see only face pixels.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import NamedTuple

import numpy as np
from scipy.ndimage import binary_erosion

from swapkit import imgcore
from swapkit.geometry import SimilarityTransform
from swapkit.models import FaceSwapModel
from .color import idt_transfer, rct_transfer
from .poisson import poisson_blend

SHARPEN_SIGMA = 1.0
IDT_SEED = 0
BINARIZE = 0.5

COLOR_MODES = ("none", "rct", "idt")
BLEND_MODES = ("alpha", "poisson")
DIRECTIONS = ("src2dst", "dst2src")


class ConvertError(RuntimeError):
    pass


@dataclass(frozen=True)
class ConvertConfig:
    direction: str = "src2dst"
    color_mode: str = "none"
    blend_mode: str = "alpha"
    feather_sigma: float = 3.0
    mask_erode: int = 2
    sharpen_amount: float = 0.0
    idt_iterations: int = 30
    cg_tol: float = 1e-6
    cg_max_iter: int | None = None

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}")
        if self.color_mode not in COLOR_MODES:
            raise ValueError(f"color_mode must be one of {COLOR_MODES}")
        if self.blend_mode not in BLEND_MODES:
            raise ValueError(f"blend_mode must be one of {BLEND_MODES}")
        if self.feather_sigma < 0 or self.mask_erode < 0 or self.sharpen_amount < 0:
            raise ValueError("feather_sigma, mask_erode, sharpen_amount must be >= 0")
        if self.idt_iterations < 1:
            raise ValueError("idt_iterations must be >= 1")
        if self.cg_tol <= 0:
            raise ValueError("cg_tol must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


class FrameJob(NamedTuple):
    index: int
    frame: np.ndarray                      # (h, w, 3) in [0, 1]
    landmarks: np.ndarray | None           # None = face never found
    mask: np.ndarray | None                # frame-space ingested mask
    transform: SimilarityTransform | None  # frame -> aligned crop


@dataclass
class FrameResult:
    index: int
    output: np.ndarray
    mask: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def _passthrough(job: FrameJob, reason: str) -> FrameResult:
    h, w = job.frame.shape[:2]
    return FrameResult(job.index, np.asarray(job.frame, dtype=np.float64).copy(),
                       np.zeros((h, w)), {"skipped": reason})


def convert_frame(model: FaceSwapModel, job: FrameJob,
                  cfg: ConvertConfig) -> FrameResult:
    """Swap one frame. Frames without landmarks pass through unchanged."""
    if job.landmarks is None or job.transform is None:
        return _passthrough(job, "no landmarks")
    frame = imgcore.as_image(job.frame, channels=3)
    h, w = frame.shape[:2]
    res = model.config.resolution
    t = job.transform
    pull_to_crop = t.inverse().matrix()

    aligned = imgcore.warp_affine(frame, pull_to_crop, res, res)
    if job.mask is not None:
        ingested = imgcore.warp_affine(job.mask, pull_to_crop, res, res)[:, :, 0]
    else:
        ingested = np.ones((res, res))

    batch = aligned.transpose(2, 0, 1)[None].astype(model.dtype)
    pred_imgs, pred_masks = model.predict_swap(batch, cfg.direction)
    face = pred_imgs[0].transpose(1, 2, 0).astype(np.float64)
    pred_mask = (pred_masks[0, 0].astype(np.float64)
                 if pred_masks is not None else np.ones((res, res)))
    mask_aligned = np.minimum(pred_mask, ingested)

    diagnostics = {"cg_iterations": 0, "cg_residual": 0.0, "color_shift": 0.0}
    interior = mask_aligned > BINARIZE
    if cfg.color_mode != "none" and interior.any():
        before = face
        if cfg.color_mode == "rct":
            face = rct_transfer(face, aligned, mask_aligned)
        else:
            face = idt_transfer(face, aligned, mask_aligned,
                                iterations=cfg.idt_iterations, seed=IDT_SEED)
        diagnostics["color_shift"] = float(np.abs(face - before)[interior].mean())

    shaped = interior
    if cfg.mask_erode > 0:
        shaped = binary_erosion(shaped, iterations=cfg.mask_erode)
    soft = shaped.astype(np.float64)
    if cfg.feather_sigma > 0:
        soft = imgcore.gaussian_blur(soft, cfg.feather_sigma)[:, :, 0]
    # the inverse warp samples with clamp-to-border; a zeroed rim keeps the
    # mask from smearing past the crop footprint
    soft[0, :] = soft[-1, :] = 0.0
    soft[:, 0] = soft[:, -1] = 0.0

    push = t.matrix()
    face_frame = imgcore.warp_affine(face, push, h, w)
    mask_frame = imgcore.warp_affine(soft, push, h, w)[:, :, 0]

    out = frame.copy()
    cols = np.flatnonzero(mask_frame.any(axis=0))
    rows = np.flatnonzero(mask_frame.any(axis=1))
    if rows.size:
        r0, r1 = rows[0], rows[-1] + 1
        c0, c1 = cols[0], cols[-1] + 1
        diagnostics["bbox"] = [int(r0), int(r1), int(c0), int(c1)]
        m = mask_frame[r0:r1, c0:c1][:, :, None]
        fg = face_frame[r0:r1, c0:c1]
        bg = frame[r0:r1, c0:c1]
        if cfg.blend_mode == "alpha":
            out[r0:r1, c0:c1] = bg + m * (fg - bg)
        else:
            blended, info = poisson_blend(
                bg, fg, mask_frame[r0:r1, c0:c1] > BINARIZE,
                cg_tol=cfg.cg_tol, cg_max_iter=cfg.cg_max_iter)
            diagnostics["cg_iterations"] = info["iterations"]
            diagnostics["cg_residual"] = info["residual"]
            if "warning" in info:
                diagnostics["poisson_warning"] = info["warning"]
            out[r0:r1, c0:c1] = bg + m * (blended - bg)
        if cfg.sharpen_amount > 0:
            sharp = imgcore.unsharp_sharpen(out[r0:r1, c0:c1], SHARPEN_SIGMA,
                                            cfg.sharpen_amount)
            out[r0:r1, c0:c1] = out[r0:r1, c0:c1] + m * (sharp - out[r0:r1, c0:c1])
        out[r0:r1, c0:c1] = imgcore.clamp01(out[r0:r1, c0:c1])
    else:
        diagnostics["skipped"] = "empty mask"
    return FrameResult(job.index, out, mask_frame, diagnostics)


def convert_sequence(model: FaceSwapModel, jobs, cfg: ConvertConfig,
                     workers: int = 1) -> list[FrameResult]:
    """convert_frame over a job list, order-preserving.

    Per-frame failures become passthrough results carrying the error text;
    they never abort the batch. Output is independent of worker count.
    """
    jobs = list(jobs)
    if not jobs:
        return []

    def run(job: FrameJob) -> FrameResult:
        try:
            return convert_frame(model, job, cfg)
        except Exception as exc:
            result = _passthrough(job, "error")
            result.diagnostics["error"] = f"{type(exc).__name__}: {exc}"
            return result

    if workers <= 1:
        return [run(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, jobs))

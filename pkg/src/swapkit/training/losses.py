"""Reconstruction and regularization losses.

The image term mixes structural dissimilarity with plain squared error:
DSSIM supplies perceptual structure, MSE pins absolute colors. Both are
averaged under a normalized per-pixel weight map so eye regions can count
more. The latent pull (trueface_loss) matches per-channel moments of the
src-side codes to detached dst-side statistics.
"""

from __future__ import annotations

import numpy as np

from swapkit.autograd import Tensor, ops
from swapkit.imgcore import gaussian_kernel1d
from .config import TrainConfig

SSIM_SIGMA = 1.5
SSIM_RADIUS = 5            # 11-tap window
_K1, _K2 = 0.01, 0.03      # stabilizers for dynamic range L = 1
C1 = (_K1) ** 2
C2 = (_K2) ** 2


def _ssim_kernel(dtype) -> np.ndarray:
    full = gaussian_kernel1d(SSIM_SIGMA)
    centre = full.size // 2
    k = full[centre - SSIM_RADIUS:centre + SSIM_RADIUS + 1]
    return (k / k.sum()).astype(dtype)


def ssim_map(a: Tensor, b: Tensor) -> Tensor:
    """Per-pixel SSIM over valid 11x11 Gaussian windows (sigma 1.5).

    Output is (n, c, h-10, w-10). Biased (moment) covariance estimates,
    matching the reference formulation. For bitwise-identical inputs every
    numerator equals its denominator exactly, so the map is exactly 1.
    """
    if a.shape != b.shape:
        raise ValueError(f"ssim_map: shapes {tuple(a.shape)} and {tuple(b.shape)} differ")
    if a.ndim != 4:
        raise ValueError("ssim_map expects (n, c, h, w)")
    k = _ssim_kernel(a.dtype)
    mu_a = ops.window_filter(a, k)
    mu_b = ops.window_filter(b, k)
    raw_aa = ops.window_filter(ops.mul(a, a), k)
    raw_bb = ops.window_filter(ops.mul(b, b), k)
    raw_ab = ops.window_filter(ops.mul(a, b), k)
    var_a = ops.sub(raw_aa, ops.mul(mu_a, mu_a))
    var_b = ops.sub(raw_bb, ops.mul(mu_b, mu_b))
    cov = ops.sub(raw_ab, ops.mul(mu_a, mu_b))
    num = ops.mul(ops.add_scalar(ops.mul_scalar(ops.mul(mu_a, mu_b), 2.0), C1),
                  ops.add_scalar(ops.mul_scalar(cov, 2.0), C2))
    den = ops.mul(ops.add_scalar(ops.add(ops.mul(mu_a, mu_a), ops.mul(mu_b, mu_b)), C1),
                  ops.add_scalar(ops.add(var_a, var_b), C2))
    return ops.div(num, den)


def _weight_tensor(weights, n, c, h, w, crop: int, dtype) -> Tensor:
    """Normalized constant weight map, expanded to (n, c, h, w)."""
    wm = np.asarray(weights, dtype=dtype)
    if wm.shape != (n, h + 2 * crop, w + 2 * crop):
        raise ValueError(
            f"weight map shape {wm.shape} does not match batch "
            f"({n}, {h + 2 * crop}, {w + 2 * crop})")
    if crop:
        wm = wm[:, crop:-crop, crop:-crop]
    if np.any(wm < 0):
        raise ValueError("weight map must be nonnegative")
    total = wm.sum(dtype=np.float64)
    if total <= 0:
        raise ValueError("weight map sums to zero")
    wm = (wm / (c * total)).astype(dtype)
    return Tensor(np.broadcast_to(wm[:, None], (n, c, h, w)))


def dssim(a: Tensor, b: Tensor, weights) -> Tensor:
    """(1 - SSIM) / 2 averaged under the normalized weight map.

    weights is a constant (n, h, w) array at image resolution; it is
    cropped by the window radius to match the valid SSIM map, then
    normalized, so scaling the map changes nothing.
    """
    smap = ssim_map(a, b)
    n, c, hh, ww = smap.shape
    wt = _weight_tensor(weights, n, c, hh, ww, SSIM_RADIUS, smap.dtype)
    dis = ops.mul_scalar(ops.add_scalar(ops.mul_scalar(smap, -1.0), 1.0), 0.5)
    return ops.tsum(ops.mul(dis, wt))


def weighted_mse(a: Tensor, b: Tensor, weights) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"weighted_mse: shapes {tuple(a.shape)} and {tuple(b.shape)} differ")
    n, c, h, w = a.shape
    wt = _weight_tensor(weights, n, c, h, w, 0, a.dtype)
    diff = ops.sub(a, b)
    return ops.tsum(ops.mul(ops.mul(diff, diff), wt))


def mask_mse(pred_mask: Tensor, true_mask: Tensor) -> Tensor:
    if pred_mask.shape != true_mask.shape:
        raise ValueError(
            f"mask_mse: shapes {tuple(pred_mask.shape)} and {tuple(true_mask.shape)} differ")
    diff = ops.sub(pred_mask, true_mask)
    return ops.mean(ops.mul(diff, diff))


def mixed_loss(pred: Tensor, target: Tensor, pred_mask, true_mask,
               weights, cfg: TrainConfig):
    """One side's reconstruction loss.

    Returns (loss tensor, raw component dict). The tensor is
    dssim_weight * dssim + mse_weight * weighted MSE
    + mask_loss_weight * mask MSE; the dict holds the unweighted values.
    """
    d = dssim(pred, target, weights)
    m = weighted_mse(pred, target, weights)
    total = ops.add(ops.mul_scalar(d, cfg.dssim_weight), ops.mul_scalar(m, cfg.mse_weight))
    parts = {"dssim": d.item(), "mse": m.item()}
    if pred_mask is not None:
        if true_mask is None:
            raise ValueError("model predicts masks but the dataset has no ground truth masks")
        mk = mask_mse(pred_mask, true_mask)
        total = ops.add(total, ops.mul_scalar(mk, cfg.mask_loss_weight))
        parts["mask"] = mk.item()
    else:
        parts["mask"] = 0.0
    return total, parts


def trueface_loss(latents_src: Tensor, latents_dst: Tensor, structure: str) -> Tensor:
    """Pull src-side latent statistics toward the dst side.

    Sum of squared per-channel mean and std gaps, computed over batch and
    spatial positions. The dst side is detached: its statistics act as a
    fixed target, so gradients reach only the src path. For DF the codes
    are the Inter outputs; for LIAE the two InterAB outputs.
    """
    if structure not in ("df", "liae"):
        raise ValueError(f"unknown structure {structure!r}")
    if latents_src.shape != latents_dst.shape:
        raise ValueError(
            f"latent shapes differ: {tuple(latents_src.shape)} vs {tuple(latents_dst.shape)}"
            f" (structure {structure}: pass the matching code pair)")
    mu_s, sig_s = ops.channel_stats(latents_src)
    mu_d, sig_d = ops.channel_stats(latents_dst.detach())
    dmu = ops.sub(mu_s, mu_d)
    dsig = ops.sub(sig_s, sig_d)
    return ops.add(ops.tsum(ops.mul(dmu, dmu)), ops.tsum(ops.mul(dsig, dsig)))

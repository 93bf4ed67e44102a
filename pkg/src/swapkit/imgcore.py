"""Image containers, resampling, filtering and colour-space primitives.

Images are float arrays of shape (h, w, c) with c in {1, 3} and samples
nominally in [0, 1]; clamping to [0, 1] happens at the boundaries that write
images (file output, sharpening, colour conversion back to RGB). Filters use
replicated borders, warps clamp sample coordinates to the border.
"""

import numpy as np
from PIL import Image as _PILImage

from swapkit import _kernels


def as_image(arr, channels=None):
    """Validate and normalize an array into (h, w, c) image form."""
    img = np.asarray(arr, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ValueError(f"expected (h, w, 1|3) image, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"empty image: shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite samples")
    if channels is not None and img.shape[2] != channels:
        raise ValueError(f"expected {channels}-channel image, got {img.shape[2]}")
    return img


def clamp01(img):
    return np.clip(img, 0.0, 1.0)


def bilinear_sample(img, x, y):
    """Sample img at continuous (x, y), clamping coordinates to the border.

    Returns a (c,) vector. Integer coordinates return exact pixel values.
    """
    img = as_image(img)
    h, w, _ = img.shape
    x = min(max(float(x), 0.0), w - 1.0)
    y = min(max(float(y), 0.0), h - 1.0)
    x0 = min(int(np.floor(x)), max(w - 2, 0))
    y0 = min(int(np.floor(y)), max(h - 2, 0))
    fx = x - x0
    fy = y - y0
    x1 = min(x0 + 1, w - 1)
    y1 = min(y0 + 1, h - 1)
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def warp_affine(img, m, out_h, out_w):
    """Warp with the inverse-mapping convention.

    m is a 2x3 matrix taking output pixel coordinates (x, y, 1) to input
    coordinates; every output pixel is bilinearly sampled there. The identity
    matrix reproduces the input bit-exactly.
    """
    img = as_image(img)
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (2, 3):
        raise ValueError(f"expected 2x3 warp matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("warp matrix contains non-finite entries")
    if out_h < 1 or out_w < 1:
        raise ValueError("output size must be positive")
    return _kernels.warp_bilinear(img, m, int(out_h), int(out_w))


def gaussian_kernel1d(sigma):
    """Normalized Gaussian taps with radius ceil(3*sigma)."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return np.ones(1)
    radius = int(np.ceil(3.0 * sigma))
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (t / sigma) ** 2)
    return k / k.sum()


def _filter_rows(img, kernel):
    r = len(kernel) // 2
    if r == 0:
        return img * kernel[0]
    pad = np.pad(img, ((r, r), (0, 0), (0, 0)), mode="edge")
    win = np.lib.stride_tricks.sliding_window_view(pad, len(kernel), axis=0)
    return win @ kernel


def _filter_cols(img, kernel):
    r = len(kernel) // 2
    if r == 0:
        return img * kernel[0]
    pad = np.pad(img, ((0, 0), (r, r), (0, 0)), mode="edge")
    win = np.lib.stride_tricks.sliding_window_view(pad, len(kernel), axis=1)
    return win @ kernel


def gaussian_blur(img, sigma):
    """Separable Gaussian blur with replicated borders; sigma=0 is identity."""
    img = as_image(img)
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return img.copy()
    k = gaussian_kernel1d(sigma)
    return _filter_cols(_filter_rows(img, k), k)


def unsharp_sharpen(img, sigma, amount):
    """Unsharp masking: img + amount * (img - blur(img, sigma)), clamped."""
    img = as_image(img)
    if sigma < 0 or amount < 0:
        raise ValueError("sigma and amount must be >= 0")
    if amount == 0:
        return img.copy()
    return clamp01(img + amount * (img - gaussian_blur(img, sigma)))


# sRGB <-> CIELAB (D65), L rescaled to [0, 1].

_RGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)
_WHITE_D65 = np.array([0.95047, 1.0, 1.08883])
_LAB_DELTA = 6.0 / 29.0


def _srgb_to_linear(v):
    return np.where(v > 0.04045, ((v + 0.055) / 1.055) ** 2.4, v / 12.92)


def _linear_to_srgb(v):
    v = np.maximum(v, 0.0)
    return np.where(v > 0.0031308, 1.055 * v ** (1.0 / 2.4) - 0.055, 12.92 * v)


def _lab_f(t):
    d3 = _LAB_DELTA ** 3
    return np.where(t > d3, np.cbrt(t), t / (3.0 * _LAB_DELTA ** 2) + 4.0 / 29.0)


def _lab_f_inv(t):
    return np.where(t > _LAB_DELTA, t ** 3, 3.0 * _LAB_DELTA ** 2 * (t - 4.0 / 29.0))


def rgb_to_lab(img):
    """D65 CIELAB; channel 0 is L* / 100, channels 1,2 are a*, b* native."""
    img = as_image(img, channels=3)
    xyz = _srgb_to_linear(img) @ _RGB_TO_XYZ.T
    f = _lab_f(xyz / _WHITE_D65)
    lab = np.empty_like(img)
    lab[:, :, 0] = (116.0 * f[:, :, 1] - 16.0) / 100.0
    lab[:, :, 1] = 500.0 * (f[:, :, 0] - f[:, :, 1])
    lab[:, :, 2] = 200.0 * (f[:, :, 1] - f[:, :, 2])
    return lab


def lab_to_rgb(lab):
    """Inverse of rgb_to_lab; output clamped to [0, 1]."""
    lab = as_image(lab, channels=3)
    fy = (lab[:, :, 0] * 100.0 + 16.0) / 116.0
    fx = fy + lab[:, :, 1] / 500.0
    fz = fy - lab[:, :, 2] / 200.0
    xyz = np.stack([_lab_f_inv(fx), _lab_f_inv(fy), _lab_f_inv(fz)], axis=2)
    xyz *= _WHITE_D65
    rgb = _linear_to_srgb(xyz @ _XYZ_TO_RGB.T)
    return clamp01(rgb)


def read_png(path):
    """Read an 8-bit PNG into a float image in [0, 1]."""
    with _PILImage.open(path) as im:
        if im.mode == "L":
            arr = np.asarray(im, dtype=np.float64)[:, :, None]
        else:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    return arr / 255.0


def write_png(path, img):
    """Write a float image as 8-bit PNG, rounding half up."""
    img = as_image(img)
    q = np.floor(clamp01(img) * 255.0 + 0.5).astype(np.uint8)
    if q.shape[2] == 1:
        _PILImage.fromarray(q[:, :, 0], mode="L").save(path, format="PNG")
    else:
        _PILImage.fromarray(q, mode="RGB").save(path, format="PNG")

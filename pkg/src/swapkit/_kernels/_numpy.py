"""Pure-numpy implementations of the hot kernels.

These are the fallback used when the compiled extension is unavailable.
Both backends implement the same contracts; see test_kernels.py for the
equivalence suite.
"""

import numpy as np

BACKEND_NAME = "numpy"


def im2col(x, k, stride, oh, ow):
    """Unfold padded input into convolution columns.

    x: (n, c, hp, wp) contiguous array, already padded.
    Returns (c*k*k, n*oh*ow) where row (c*k + ki)*k + kj, column
    (n*oh + oy)*ow + ox holds x[n, c, oy*stride + ki, ox*stride + kj].
    """
    n, c, hp, wp = x.shape
    win = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]
    if win.shape[2] != oh or win.shape[3] != ow:
        win = win[:, :, :oh, :ow]
    return win.transpose(1, 4, 5, 0, 2, 3).reshape(c * k * k, n * oh * ow)


def col2im(cols, n, c, hp, wp, k, stride, oh, ow):
    """Scatter-add convolution columns back onto the padded input grid.

    Adjoint of im2col: overlapping windows accumulate.
    """
    x = np.zeros((n, c, hp, wp), dtype=cols.dtype)
    blocks = cols.reshape(c, k, k, n, oh, ow).transpose(3, 0, 1, 2, 4, 5)
    for ki in range(k):
        for kj in range(k):
            x[:, :, ki:ki + stride * oh:stride, kj:kj + stride * ow:stride] += (
                blocks[:, :, ki, kj]
            )
    return x


def warp_bilinear(img, m, oh, ow):
    """Inverse-mapped bilinear warp with clamp-to-border sampling.

    img: (h, w, c); m: 2x3 matrix mapping output (x, y, 1) to input coords.
    """
    h, w, c = img.shape
    ys, xs = np.meshgrid(
        np.arange(oh, dtype=np.float64), np.arange(ow, dtype=np.float64),
        indexing="ij",
    )
    sx = m[0, 0] * xs + m[0, 1] * ys + m[0, 2]
    sy = m[1, 0] * xs + m[1, 1] * ys + m[1, 2]
    np.clip(sx, 0.0, w - 1.0, out=sx)
    np.clip(sy, 0.0, h - 1.0, out=sy)

    x0 = np.floor(sx)
    y0 = np.floor(sy)
    # keep the 2x2 footprint inside the image; at the far edge fx/fy become 1
    np.clip(x0, 0, max(w - 2, 0), out=x0)
    np.clip(y0, 0, max(h - 2, 0), out=y0)
    fx = (sx - x0).astype(img.dtype)
    fy = (sy - y0).astype(img.dtype)
    x0 = x0.astype(np.intp)
    y0 = y0.astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)

    flat = img.reshape(h * w, c)
    v00 = flat[y0 * w + x0]
    v01 = flat[y0 * w + x1]
    v10 = flat[y1 * w + x0]
    v11 = flat[y1 * w + x1]
    fx = fx[..., None]
    fy = fy[..., None]
    top = v00 * (1.0 - fx) + v01 * fx
    bot = v10 * (1.0 - fx) + v11 * fx
    return top * (1.0 - fy) + bot * fy

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels.

Contracts and numerical behaviour match swapkit._kernels._numpy exactly:
the same per-cell accumulation order in col2im and the same dtype of each
intermediate in warp_bilinear, so the two backends agree bit for bit.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()

BACKEND_NAME = "native"

ctypedef fused real:
    float
    double


def im2col(x, int k, int stride, int oh, int ow):
    """Unfold padded input into convolution columns; see the numpy twin."""
    x = np.ascontiguousarray(x)
    if x.dtype == np.float32:
        return _im2col[float](x, k, stride, oh, ow)
    return _im2col[double](x.astype(np.float64, copy=False), k, stride, oh, ow)


def col2im(cols, int n, int c, int hp, int wp, int k, int stride, int oh, int ow):
    """Scatter-add convolution columns back onto the padded input grid."""
    cols = np.ascontiguousarray(cols)
    if cols.dtype == np.float32:
        return _col2im[float](cols, n, c, hp, wp, k, stride, oh, ow)
    return _col2im[double](cols.astype(np.float64, copy=False), n, c, hp, wp, k, stride, oh, ow)


def warp_bilinear(img, m, int oh, int ow):
    """Inverse-mapped bilinear warp with clamp-to-border sampling."""
    img = np.ascontiguousarray(img)
    m = np.asarray(m, dtype=np.float64)
    if img.dtype == np.float32:
        return _warp[float](img, m, oh, ow)
    return _warp[double](img.astype(np.float64, copy=False), m, oh, ow)


cdef _im2col(real[:, :, :, ::1] x, int k, int stride, int oh, int ow):
    cdef int n = x.shape[0], c = x.shape[1]
    out_np = np.empty((c * k * k, n * oh * ow),
                      dtype=np.float32 if real is float else np.float64)
    cdef real[:, ::1] out = out_np
    cdef int ni, ci, ki, kj, oy, ox, row, col
    for ci in range(c):
        for ki in range(k):
            for kj in range(k):
                row = (ci * k + ki) * k + kj
                for ni in range(n):
                    for oy in range(oh):
                        col = (ni * oh + oy) * ow
                        for ox in range(ow):
                            out[row, col + ox] = x[ni, ci, oy * stride + ki,
                                                   ox * stride + kj]
    return out_np


cdef _col2im(real[:, ::1] cols, int n, int c, int hp, int wp,
             int k, int stride, int oh, int ow):
    out_np = np.zeros((n, c, hp, wp),
                      dtype=np.float32 if real is float else np.float64)
    cdef real[:, :, :, ::1] out = out_np
    cdef int ni, ci, ki, kj, oy, ox, row, col
    # (ki, kj) is the outer accumulation order, matching the numpy twin so
    # per-cell floating point sums round identically
    for ki in range(k):
        for kj in range(k):
            for ni in range(n):
                for ci in range(c):
                    row = (ci * k + ki) * k + kj
                    for oy in range(oh):
                        col = (ni * oh + oy) * ow
                        for ox in range(ow):
                            out[ni, ci, oy * stride + ki, ox * stride + kj] += (
                                cols[row, col + ox]
                            )
    return out_np


cdef _warp(real[:, :, ::1] img, double[:, ::1] m, int oh, int ow):
    cdef int h = img.shape[0], w = img.shape[1], c = img.shape[2]
    out_np = np.empty((oh, ow, c),
                      dtype=np.float32 if real is float else np.float64)
    cdef real[:, :, ::1] out = out_np
    cdef int oy, ox, ci, x0, y0, x1, y1
    cdef double sx, sy, fx0, fy0
    cdef real fx, fy, top, bot
    cdef int xmax = w - 2 if w >= 2 else 0
    cdef int ymax = h - 2 if h >= 2 else 0
    for oy in range(oh):
        for ox in range(ow):
            sx = m[0, 0] * ox + m[0, 1] * oy + m[0, 2]
            sy = m[1, 0] * ox + m[1, 1] * oy + m[1, 2]
            if sx < 0.0:
                sx = 0.0
            elif sx > w - 1.0:
                sx = w - 1.0
            if sy < 0.0:
                sy = 0.0
            elif sy > h - 1.0:
                sy = h - 1.0
            fx0 = floor(sx)
            fy0 = floor(sy)
            x0 = <int>fx0
            y0 = <int>fy0
            if x0 > xmax:
                x0 = xmax
            if y0 > ymax:
                y0 = ymax
            fx = <real>(sx - x0)
            fy = <real>(sy - y0)
            x1 = x0 + 1 if x0 + 1 < w else w - 1
            y1 = y0 + 1 if y0 + 1 < h else h - 1
            for ci in range(c):
                top = img[y0, x0, ci] * (<real>1.0 - fx) + img[y0, x1, ci] * fx
                bot = img[y1, x0, ci] * (<real>1.0 - fx) + img[y1, x1, ci] * fx
                out[oy, ox, ci] = top * (<real>1.0 - fy) + bot * fy
    return out_np

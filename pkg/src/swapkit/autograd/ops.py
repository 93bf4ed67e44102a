"""Op library. Every op validates shapes exactly; nothing broadcasts.

Convolutions go through im2col and one GEMM per direction, which is where
nearly all training time lives; the backing kernels come from the selected
backend (compiled or numpy). conv2d carries no bias term: feature maps are
normalized by the activations around them and the dense layers carry the
offsets.
"""

from __future__ import annotations

import math

import numpy as np

from swapkit import _kernels
from .tensor import Tensor, result

_STATS_EPS = 1e-8   # inside the sqrt of channel_stats


def _check_same(a: Tensor, b: Tensor, op: str) -> None:
    if a.data.shape != b.data.shape:
        raise ValueError(f"{op}: shapes {a.data.shape} and {b.data.shape} differ")
    if a.data.dtype != b.data.dtype:
        raise ValueError(f"{op}: dtypes {a.data.dtype} and {b.data.dtype} differ")


# ---------------------------------------------------------------------------
# elementwise

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same(a, b, "add")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(g)

    return result(a.data + b.data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same(a, b, "sub")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(-g)

    return result(a.data - b.data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same(a, b, "mul")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * b.data)
        if b.requires_grad:
            b._accumulate(g * a.data)

    return result(a.data * b.data, (a, b), backward)


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_same(a, b, "div")
    out = a.data / b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(g / b.data)
        if b.requires_grad:
            b._accumulate(-g * out / b.data)

    return result(out, (a, b), backward)


def add_scalar(a: Tensor, s) -> Tensor:
    s = float(s)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g)

    return result(a.data + s, (a,), backward)


def mul_scalar(a: Tensor, s) -> Tensor:
    s = float(s)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * s)

    return result(a.data * s, (a,), backward)


def leaky_relu(a: Tensor, slope: float = 0.1) -> Tensor:
    slope = float(slope)
    mask = a.data >= 0

    def backward(g):
        if a.requires_grad:
            a._accumulate(np.where(mask, g, g * slope))

    return result(np.where(mask, a.data, a.data * slope), (a,), backward)


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * out * (1.0 - out))

    return result(out, (a,), backward)


# ---------------------------------------------------------------------------
# reductions

def tsum(a: Tensor) -> Tensor:
    def backward(g):
        if a.requires_grad:
            a._accumulate(np.full(a.data.shape, g, dtype=a.data.dtype))

    return result(a.data.sum(), (a,), backward)


def mean(a: Tensor) -> Tensor:
    n = a.data.size
    if n == 0:
        raise ValueError("mean of empty tensor")

    def backward(g):
        if a.requires_grad:
            a._accumulate(np.full(a.data.shape, g / n, dtype=a.data.dtype))

    return result(a.data.mean(dtype=a.data.dtype), (a,), backward)


def channel_stats(a: Tensor) -> tuple[Tensor, Tensor]:
    """Per-channel mean and standard deviation, fused.

    Accepts (n, c, h, w) maps reduced over batch and space, or (n, c)
    codes reduced over batch. The std carries the eps inside the square
    root, so its gradient (x - mu) / (count * sigma) is exact as computed.
    """
    x = a.data
    if x.ndim == 4:
        axes = (0, 2, 3)
        shape = (1, x.shape[1], 1, 1)
    elif x.ndim == 2:
        axes = (0,)
        shape = (1, x.shape[1])
    else:
        raise ValueError(f"channel_stats expects 2-d or 4-d input, got {x.ndim}-d")
    count = x.size // x.shape[1]
    mu = x.mean(axis=axes, dtype=x.dtype)
    centered = x - mu.reshape(shape)
    var = (centered * centered).mean(axis=axes, dtype=x.dtype)
    sigma = np.sqrt(var + np.asarray(_STATS_EPS, dtype=x.dtype))

    def backward_mu(g):
        if a.requires_grad:
            a._accumulate(np.broadcast_to(g.reshape(shape) / count, x.shape))

    def backward_sigma(g):
        if a.requires_grad:
            a._accumulate(g.reshape(shape) * centered / (count * sigma.reshape(shape)))

    mu_t = result(mu, (a,), backward_mu)
    sigma_t = result(sigma, (a,), backward_sigma)
    return mu_t, sigma_t


# ---------------------------------------------------------------------------
# shape

def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    out = a.data.reshape(shape)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g.reshape(a.data.shape))

    return result(out, (a,), backward)


def flatten(a: Tensor) -> Tensor:
    n = a.data.shape[0]
    return reshape(a, (n, a.data.size // n))


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != b.data.ndim or a.data.ndim < 2:
        raise ValueError(f"concat_channels: ranks {a.data.ndim} and {b.data.ndim}")
    if a.data.shape[0] != b.data.shape[0] or a.data.shape[2:] != b.data.shape[2:]:
        raise ValueError(f"concat_channels: shapes {a.data.shape} and {b.data.shape}")
    if a.data.dtype != b.data.dtype:
        raise ValueError("concat_channels: dtypes differ")
    ca = a.data.shape[1]

    def backward(g):
        if a.requires_grad:
            a._accumulate(g[:, :ca])
        if b.requires_grad:
            b._accumulate(g[:, ca:])

    return result(np.concatenate([a.data, b.data], axis=1), (a, b), backward)


def detach(a: Tensor) -> Tensor:
    return a.detach()


# ---------------------------------------------------------------------------
# dense

def dense(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    if x.data.ndim != 2 or w.data.ndim != 2 or b.data.ndim != 1:
        raise ValueError("dense expects x (n, i), w (i, o), b (o,)")
    if x.data.shape[1] != w.data.shape[0] or w.data.shape[1] != b.data.shape[0]:
        raise ValueError(
            f"dense: x {x.data.shape}, w {w.data.shape}, b {b.data.shape} do not chain")
    out = x.data @ w.data + b.data

    def backward(g):
        if x.requires_grad:
            x._accumulate(g @ w.data.T)
        if w.requires_grad:
            w._accumulate(x.data.T @ g)
        if b.requires_grad:
            b._accumulate(g.sum(axis=0, dtype=g.dtype))

    return result(out, (x, w, b), backward)


def bias_channels(x: Tensor, b: Tensor) -> Tensor:
    """Add a per-channel bias to a (n, c, h, w) tensor. b has shape (c,)."""
    if x.data.ndim != 4 or b.data.ndim != 1:
        raise ValueError("bias_channels expects x (n, c, h, w) and b (c,)")
    if x.data.shape[1] != b.data.shape[0]:
        raise ValueError(
            f"bias_channels: {x.data.shape[1]} channels vs {b.data.shape[0]} biases")
    if x.data.dtype != b.data.dtype:
        raise ValueError(f"dtype mismatch: {x.data.dtype} vs {b.data.dtype}")
    out = x.data + b.data[None, :, None, None]

    def backward(g):
        if x.requires_grad:
            x._accumulate(g)
        if b.requires_grad:
            b._accumulate(g.sum(axis=(0, 2, 3), dtype=g.dtype))

    return result(out, (x, b), backward)


# ---------------------------------------------------------------------------
# convolution

def _same_pads(size: int, k: int, stride: int) -> tuple[int, int, int]:
    out = -(-size // stride)
    total = max((out - 1) * stride + k - size, 0)
    lo = total // 2
    return out, lo, total - lo


def conv2d(x: Tensor, w: Tensor, stride: int = 1, padding: str = "same") -> Tensor:
    """2-d convolution (cross-correlation), no bias.

    x: (n, c_in, h, w); w: (c_out, c_in, k, k). padding "same" pads with
    zeros so the output covers ceil(size / stride) positions, splitting any
    odd pad with the extra row/column at the end; "valid" requires the
    kernel to fit and never pads.
    """
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ValueError("conv2d expects 4-d input and kernel")
    n, c_in, h, wd = x.data.shape
    c_out, c_in_w, k, k2 = w.data.shape
    if k != k2:
        raise ValueError(f"conv2d kernel must be square, got {k}x{k2}")
    if k % 2 == 0:
        raise ValueError(f"conv2d kernel size must be odd, got {k}")
    if c_in != c_in_w:
        raise ValueError(f"conv2d: input has {c_in} channels, kernel expects {c_in_w}")
    if x.data.dtype != w.data.dtype:
        raise ValueError("conv2d: input and kernel dtypes differ")
    if stride < 1:
        raise ValueError(f"conv2d: stride must be positive, got {stride}")

    if padding == "same":
        oh, pt, pb = _same_pads(h, k, stride)
        ow, pl, pr = _same_pads(wd, k, stride)
    elif padding == "valid":
        if h < k or wd < k:
            raise ValueError(f"conv2d valid: kernel {k} exceeds input {h}x{wd}")
        oh, ow = (h - k) // stride + 1, (wd - k) // stride + 1
        pt = pb = pl = pr = 0
    else:
        raise ValueError(f"conv2d: padding must be 'same' or 'valid', got {padding!r}")

    if pt or pb or pl or pr:
        xp = np.pad(x.data, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    else:
        xp = x.data
    hp, wp = xp.shape[2], xp.shape[3]
    cols = _kernels.im2col(xp, k, stride, oh, ow)
    wm = w.data.reshape(c_out, c_in * k * k)
    out = np.ascontiguousarray(
        (wm @ cols).reshape(c_out, n, oh, ow).transpose(1, 0, 2, 3))

    def backward(g):
        gm = np.ascontiguousarray(g.transpose(1, 0, 2, 3)).reshape(c_out, n * oh * ow)
        if w.requires_grad:
            w._accumulate((gm @ cols.T).reshape(w.data.shape))
        if x.requires_grad:
            dcols = wm.T @ gm
            dxp = _kernels.col2im(dcols, n, c_in, hp, wp, k, stride, oh, ow)
            x._accumulate(dxp[:, :, pt:pt + h, pl:pl + wd])

    return result(out, (x, w), backward)


def depth_to_space(x: Tensor) -> Tensor:
    """Rearrange (n, 4c, h, w) to (n, c, 2h, 2w).

    Channel 4c + 2*di + dj supplies output pixel (2i + di, 2j + dj): the
    four children of each coarse cell are stored contiguously per channel.
    """
    n, c, h, wd = x.data.shape
    if c % 4 != 0:
        raise ValueError(f"depth_to_space needs channels divisible by 4, got {c}")
    c4 = c // 4
    out = (x.data.reshape(n, c4, 2, 2, h, wd)
           .transpose(0, 1, 4, 2, 5, 3)
           .reshape(n, c4, 2 * h, 2 * wd))

    def backward(g):
        if x.requires_grad:
            gx = (g.reshape(n, c4, h, 2, wd, 2)
                  .transpose(0, 1, 3, 5, 2, 4)
                  .reshape(n, c, h, wd))
            x._accumulate(np.ascontiguousarray(gx))

    return result(np.ascontiguousarray(out), (x,), backward)


def upscale2x(x: Tensor, w: Tensor) -> Tensor:
    """Double spatial resolution: conv to 4x the target channels, then
    depth-to-space. The kernel's output channel count must be divisible
    by 4; no activation is applied here."""
    if w.data.shape[0] % 4 != 0:
        raise ValueError(
            f"upscale2x kernel must have 4*c output channels, got {w.data.shape[0]}")
    return depth_to_space(conv2d(x, w, stride=1, padding="same"))


def residual_block(x: Tensor, w1: Tensor, w2: Tensor, slope: float = 0.2) -> Tensor:
    """Two same-channel convs with a skip connection.

    y = lrelu(x + conv(lrelu(conv(x)))); both activations share the slope.
    """
    if w1.data.shape[0] != x.data.shape[1] or w2.data.shape[0] != x.data.shape[1]:
        raise ValueError(
            f"residual_block kernels must preserve {x.data.shape[1]} channels, "
            f"got {w1.data.shape[0]} and {w2.data.shape[0]}")
    y = conv2d(x, w1, stride=1, padding="same")
    y = leaky_relu(y, slope)
    y = conv2d(y, w2, stride=1, padding="same")
    return leaky_relu(add(x, y), slope)


# ---------------------------------------------------------------------------
# fixed-kernel separable filter

def _corr_valid(a: np.ndarray, k: np.ndarray, axis: int) -> np.ndarray:
    win = np.lib.stride_tricks.sliding_window_view(a, k.size, axis=axis)
    return win @ k


def _pad_axis(a: np.ndarray, pad: int, axis: int) -> np.ndarray:
    widths = [(0, 0)] * a.ndim
    widths[axis] = (pad, pad)
    return np.pad(a, widths)


def window_filter(x: Tensor, kernel: np.ndarray) -> Tensor:
    """Separable valid-range filter with a fixed 1-d kernel over h and w.

    Output is (n, c, h - K + 1, w - K + 1). The kernel is a constant, not a
    learnable tensor; gradients flow through x only.
    """
    k = np.asarray(kernel, dtype=x.data.dtype)
    if k.ndim != 1 or k.size < 1:
        raise ValueError("window_filter kernel must be a 1-d array")
    if x.data.ndim != 4:
        raise ValueError("window_filter expects (n, c, h, w)")
    if x.data.shape[2] < k.size or x.data.shape[3] < k.size:
        raise ValueError(
            f"window_filter: kernel {k.size} exceeds spatial dims {x.data.shape[2:]}")
    out = _corr_valid(_corr_valid(x.data, k, 3), k, 2)
    kr = k[::-1].copy()

    def backward(g):
        if x.requires_grad:
            dx = _corr_valid(_pad_axis(g, k.size - 1, 2), kr, 2)
            dx = _corr_valid(_pad_axis(dx, k.size - 1, 3), kr, 3)
            x._accumulate(dx)

    return result(out, (x,), backward)

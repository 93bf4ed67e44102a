"""Bias-corrected Adam with optional per-element learning-rate dropout.

State lives in plain dicts keyed by parameter name so checkpoints can
serialize it next to the weights. One adam_step call advances the shared
timestep once and updates every listed parameter in order; that order is
also the dropout draw order, which keeps runs reproducible.
"""

from __future__ import annotations

import numpy as np

ADAM_EPS = 1e-8


class OptimError(RuntimeError):
    pass


class AdamState:
    """First/second moment estimates plus the shared step counter."""

    __slots__ = ("m", "v", "t")

    def __init__(self):
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t: int = 0

    @classmethod
    def for_params(cls, named_params) -> "AdamState":
        st = cls()
        for name, p in named_params:
            st.m[name] = np.zeros_like(p.data)
            st.v[name] = np.zeros_like(p.data)
        return st

    def pack(self, names) -> bytes:
        """Flat little-endian f32 blob: all m arrays in name order, then all v."""
        chunks = [self.m[n].astype("<f4", copy=False).tobytes() for n in names]
        chunks += [self.v[n].astype("<f4", copy=False).tobytes() for n in names]
        return b"".join(chunks)

    def unpack(self, blob: bytes, named_shapes) -> None:
        """Inverse of pack. named_shapes is an ordered (name, shape) list."""
        flat = np.frombuffer(blob, dtype="<f4")
        total = sum(int(np.prod(s)) for _, s in named_shapes)
        if flat.size != 2 * total:
            raise OptimError(
                f"optimizer state holds {flat.size} floats, expected {2 * total}")
        pos = 0
        for target in (self.m, self.v):
            for name, shape in named_shapes:
                count = int(np.prod(shape))
                target[name] = flat[pos:pos + count].reshape(shape).astype(np.float32)
                pos += count


def adam_step(named_params, state: AdamState, lr: float, beta1: float,
              beta2: float, keep: float = 1.0, rng=None, eps: float = ADAM_EPS) -> None:
    """Apply one Adam update to every (name, tensor) pair, in place.

    A tensor with grad None counts as zero gradient. keep < 1 multiplies
    each element's update by an independent Bernoulli(keep) draw from rng;
    keep == 1 never touches the rng, so the plain trajectory is unchanged.
    """
    if not (0.0 < keep <= 1.0):
        raise OptimError(f"keep must be in (0, 1], got {keep}")
    if keep < 1.0 and rng is None:
        raise OptimError("learning-rate dropout needs an rng")
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for name, p in named_params:
        if name not in state.m:
            raise OptimError(f"no optimizer state for parameter {name!r}")
        g = p.grad
        if g is None:
            g = np.zeros_like(p.data)
        elif not np.all(np.isfinite(g)):
            raise OptimError(f"non-finite gradient in parameter {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        upd = lr * (m / c1) / (np.sqrt(v / c2) + eps)
        if keep < 1.0:
            mask = (rng.random(p.data.shape) < keep).astype(p.data.dtype)
            upd = upd * mask
        p.data -= upd.astype(p.data.dtype, copy=False)

"""Least-squares patch adversary for sharpening dst reconstructions.

A three-layer stride-2 conv stack maps the image to a one-channel logit
grid; each spatial logit judges one receptive-field patch. Real targets
are labeled 1, generated faces 0, and both nets minimize squared error
against their labels, which is the least-squares GAN objective.
"""

from __future__ import annotations

import numpy as np

from swapkit.autograd import Tensor, ops
from .config import TrainConfig
from .init import scaled_gaussian_init
from .optim import AdamState, adam_step

D_SLOPE = 0.2
D_CHANNELS = (16, 32)


class PatchDiscriminator:
    """Conv stack: in -> 16 -> 32 -> 1, stride 2, 3x3, leaky relu 0.2.

    Output spatial size is ceil(input / 8); a 96x96 face yields a 12x12
    logit map. Convolutions carry per-channel biases so the net can settle
    on a constant output when real and fake batches coincide.
    """

    def __init__(self, in_channels: int = 3, seed: int = 0, dtype=np.float32):
        rng = np.random.default_rng(seed)
        self.params: dict[str, Tensor] = {}
        chain = (in_channels,) + D_CHANNELS + (1,)
        for i in range(3):
            c_in, c_out = chain[i], chain[i + 1]
            w = scaled_gaussian_init((c_out, c_in, 3, 3), rng).astype(dtype)
            self.params[f"d.conv{i + 1}.w"] = Tensor(w, requires_grad=True,
                                                     name=f"d.conv{i + 1}.w")
            self.params[f"d.conv{i + 1}.b"] = Tensor(np.zeros(c_out, dtype=dtype),
                                                     requires_grad=True,
                                                     name=f"d.conv{i + 1}.b")

    def forward(self, x: Tensor) -> Tensor:
        h = x
        for i in range(3):
            h = ops.conv2d(h, self.params[f"d.conv{i + 1}.w"], stride=2, padding="same")
            h = ops.bias_channels(h, self.params[f"d.conv{i + 1}.b"])
            if i < 2:
                h = ops.leaky_relu(h, D_SLOPE)
        return h

    def named_parameters(self):
        return list(self.params.items())

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def pack(self) -> bytes:
        return b"".join(p.data.astype("<f4", copy=False).tobytes()
                        for p in self.params.values())

    def unpack(self, blob: bytes) -> None:
        flat = np.frombuffer(blob, dtype="<f4")
        total = sum(p.data.size for p in self.params.values())
        if flat.size != total:
            raise ValueError(f"discriminator blob holds {flat.size} floats, expected {total}")
        pos = 0
        for p in self.params.values():
            n = p.data.size
            p.data = flat[pos:pos + n].reshape(p.data.shape).astype(np.float32)
            pos += n


def lsgan_loss(logits: Tensor, target: float) -> Tensor:
    """Mean squared distance of the logit map from a constant label."""
    d = ops.add_scalar(logits, -float(target))
    return ops.mean(ops.mul(d, d))


def gan_step(pred_dst: Tensor, target_dst: Tensor, disc, disc_state: AdamState,
             cfg: TrainConfig):
    """One adversarial round. Returns (generator term, disc loss value).

    With gan_weight 0 the discriminator is untouched and the generator
    term is a constant zero. Otherwise the discriminator takes one Adam
    step on (real=target, fake=pred detached) first, and the generator
    term is gan_weight * LSGAN(D(pred), 1) through the updated weights.
    Any gradients the later generator backward deposits in the
    discriminator are cleared at the next round's zero_grad.
    """
    if cfg.gan_weight == 0:
        return Tensor(np.zeros((), dtype=pred_dst.dtype)), None
    fake = pred_dst.detach()
    d_loss = ops.mul_scalar(
        ops.add(lsgan_loss(disc.forward(Tensor(target_dst.data)), 1.0),
                lsgan_loss(disc.forward(fake), 0.0)), 0.5)
    disc.zero_grad()
    d_loss.backward()
    adam_step(disc.named_parameters(), disc_state, cfg.lr, cfg.beta1, cfg.beta2)
    gen = lsgan_loss(disc.forward(pred_dst), 1.0)
    return ops.mul_scalar(gen, cfg.gan_weight), float(d_loss.item())

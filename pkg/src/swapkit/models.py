"""The two face-swap autoencoder topologies and their checkpoint format.

DF: one shared Encoder+Inter trunk with a decoder per identity; swapping
routes footage through the other identity's decoder. LIAE: shared Encoder
and Decoder with two Inters, identity selected by which latent codes get
concatenated. HD variants add one residual block after every encoder stage
and decoder upscale.

A checkpoint is a directory: manifest.json (config, iteration, seed, weight
index) plus weights.bin, the little-endian float32 parameter arrays
concatenated in index order. Training state (optimizer moments, GAN
discriminator) rides in separate files so the weight format stays minimal.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, asdict
from typing import NamedTuple

import numpy as np

from .autograd import Tensor, ops, parameter
from .training.init import cai_init, scaled_gaussian_init

STRUCTURES = ("df", "liae")
_MANIFEST = "manifest.json"
_WEIGHTS = "weights.bin"


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    structure: str = "df"
    hd: bool = False
    resolution: int = 96
    base_channels: int = 64
    ae_dims: int = 256
    mask_head: bool = True

    def __post_init__(self):
        if self.structure not in STRUCTURES:
            raise ModelError(f"structure must be one of {STRUCTURES}, got {self.structure!r}")
        if self.resolution % 16 != 0 or self.resolution <= 0:
            raise ModelError(f"resolution must be a positive multiple of 16, got {self.resolution}")
        if self.base_channels < 1 or self.ae_dims < 1:
            raise ModelError("base_channels and ae_dims must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(structure=d["structure"], hd=bool(d["hd"]),
                   resolution=int(d["resolution"]), base_channels=int(d["base_channels"]),
                   ae_dims=int(d["ae_dims"]), mask_head=bool(d["mask_head"]))


class TrainForward(NamedTuple):
    pred_src: Tensor
    pred_src_mask: Tensor | None
    pred_dst: Tensor
    pred_dst_mask: Tensor | None
    latents: dict


class FaceSwapModel:
    """Holds the named parameter tensors and runs the forward routes.

    One instance belongs to one training loop; concurrent read-only
    inference (predict_swap) is fine since forward passes never mutate
    parameters.
    """

    def __init__(self, config: ModelConfig, seed: int, dtype=np.float32,
                 cai: bool = True):
        self.config = config
        self.seed = int(seed)
        self.iteration = 0
        self.dtype = np.dtype(dtype)
        self.params: dict[str, Tensor] = {}
        self._init_params(np.random.default_rng(self.seed), cai)

    # -- construction --------------------------------------------------------

    def _add_conv(self, rng, cai, name: str, c_out: int, c_in: int, k: int = 3):
        shape = (c_out, c_in, k, k)
        w = cai_init(shape, rng) if cai else scaled_gaussian_init(shape, rng)
        self.params[name] = parameter(w.astype(self.dtype), name)

    def _add_dense(self, rng, name: str, n_in: int, n_out: int):
        limit = np.sqrt(6.0 / (n_in + n_out))
        w = rng.uniform(-limit, limit, size=(n_in, n_out))
        self.params[name + ".w"] = parameter(w.astype(self.dtype), name + ".w")
        self.params[name + ".b"] = parameter(np.zeros(n_out, dtype=self.dtype), name + ".b")

    def _init_params(self, rng, cai):
        cfg = self.config
        b = cfg.base_channels
        d = cfg.ae_dims               # latent map channel width
        r16 = cfg.resolution // 16
        enc_chain = [3, b, 2 * b, 4 * b, 8 * b]

        for i in range(4):
            self._add_conv(rng, cai, f"enc.conv{i + 1}.w", enc_chain[i + 1], enc_chain[i])
            if cfg.hd:
                c = enc_chain[i + 1]
                self._add_conv(rng, cai, f"enc.res{i + 1}.w1", c, c)
                self._add_conv(rng, cai, f"enc.res{i + 1}.w2", c, c)

        flat = 8 * b * r16 * r16

        def add_inter(name):
            self._add_dense(rng, f"{name}.dense1", flat, cfg.ae_dims)
            self._add_dense(rng, f"{name}.dense2", cfg.ae_dims, r16 * r16 * d)

        def add_decoder(name, in_ch):
            chain = [in_ch, 8 * b, 4 * b, 2 * b, b]
            for i in range(4):
                self._add_conv(rng, cai, f"{name}.up{i + 1}.w", 4 * chain[i + 1], chain[i])
                if cfg.hd:
                    c = chain[i + 1]
                    self._add_conv(rng, cai, f"{name}.res{i + 1}.w1", c, c)
                    self._add_conv(rng, cai, f"{name}.res{i + 1}.w2", c, c)
            self._add_conv(rng, cai, f"{name}.img.w", 3, b)
            if cfg.mask_head:
                self._add_conv(rng, cai, f"{name}.mask.w", 1, b)

        if cfg.structure == "df":
            add_inter("inter")
            add_decoder("dec_src", d)
            add_decoder("dec_dst", d)
        else:
            add_inter("inter_ab")
            add_inter("inter_b")
            add_decoder("dec", 2 * d)

    # -- forward pieces ------------------------------------------------------

    def _encode(self, x: Tensor) -> Tensor:
        p = self.params
        for i in range(1, 5):
            x = ops.leaky_relu(ops.conv2d(x, p[f"enc.conv{i}.w"], stride=2), 0.1)
            if self.config.hd:
                x = ops.residual_block(x, p[f"enc.res{i}.w1"], p[f"enc.res{i}.w2"])
        return x

    def _inter(self, name: str, feats: Tensor) -> Tensor:
        p = self.params
        n = feats.shape[0]
        r16 = self.config.resolution // 16
        x = ops.flatten(feats)
        x = ops.dense(x, p[f"{name}.dense1.w"], p[f"{name}.dense1.b"])
        x = ops.dense(x, p[f"{name}.dense2.w"], p[f"{name}.dense2.b"])
        return ops.reshape(x, (n, self.config.ae_dims, r16, r16))

    def _decode(self, name: str, z: Tensor):
        p = self.params
        x = z
        for i in range(1, 5):
            x = ops.leaky_relu(ops.upscale2x(x, p[f"{name}.up{i}.w"]), 0.1)
            if self.config.hd:
                x = ops.residual_block(x, p[f"{name}.res{i}.w1"], p[f"{name}.res{i}.w2"])
        img = ops.sigmoid(ops.conv2d(x, p[f"{name}.img.w"]))
        mask = ops.sigmoid(ops.conv2d(x, p[f"{name}.mask.w"])) if self.config.mask_head else None
        return img, mask

    def _check_batch(self, t: Tensor, side: str):
        res = self.config.resolution
        if t.ndim != 4 or t.shape[1] != 3 or t.shape[2] != res or t.shape[3] != res:
            raise ModelError(
                f"{side} batch must be (n, 3, {res}, {res}), got {tuple(t.shape)}")
        if t.dtype != self.dtype:
            raise ModelError(f"{side} batch dtype {t.dtype} does not match model {self.dtype}")

    # -- public forward routes -----------------------------------------------

    def forward_train(self, src: Tensor, dst: Tensor) -> TrainForward:
        self._check_batch(src, "src")
        self._check_batch(dst, "dst")
        if self.config.structure == "df":
            z_src = self._inter("inter", self._encode(src))
            z_dst = self._inter("inter", self._encode(dst))
            pred_src, m_src = self._decode("dec_src", z_src)
            pred_dst, m_dst = self._decode("dec_dst", z_dst)
            latents = {"src": z_src, "dst": z_dst}
        else:
            f_src = self._encode(src)
            f_dst = self._encode(dst)
            src_ab = self._inter("inter_ab", f_src)
            dst_ab = self._inter("inter_ab", f_dst)
            dst_b = self._inter("inter_b", f_dst)
            pred_src, m_src = self._decode("dec", ops.concat_channels(src_ab, src_ab))
            pred_dst, m_dst = self._decode("dec", ops.concat_channels(dst_ab, dst_b))
            latents = {"src_ab": src_ab, "dst_ab": dst_ab, "dst_b": dst_b}
        return TrainForward(pred_src, m_src, pred_dst, m_dst, latents)

    def predict_swap(self, faces: np.ndarray, direction: str = "src2dst"):
        """Run aligned faces through the swap route; returns (imgs, masks).

        src2dst puts the src identity onto dst footage (the usual way
        around); dst2src is the mirror. Inputs and outputs are numpy
        (n, 3, res, res) in [0, 1]; masks are (n, 1, res, res) or None.
        """
        if direction not in ("src2dst", "dst2src"):
            raise ModelError(f"direction must be src2dst or dst2src, got {direction!r}")
        if self.iteration == 0:
            raise ModelError("model is untrained (iteration 0); train or load a checkpoint first")
        x = Tensor(np.ascontiguousarray(faces, dtype=self.dtype))
        self._check_batch(x, "face")
        if self.config.structure == "df":
            z = self._inter("inter", self._encode(x))
            img, mask = self._decode("dec_src" if direction == "src2dst" else "dec_dst", z)
        else:
            f = self._encode(x)
            ab = self._inter("inter_ab", f)
            other = ab if direction == "src2dst" else self._inter("inter_b", f)
            img, mask = self._decode("dec", ops.concat_channels(ab, other))
        return img.data, (mask.data if mask is not None else None)

    # -- parameter access ----------------------------------------------------

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return list(self.params.items())

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.grad = None

    # -- checkpoint ----------------------------------------------------------

    def save(self, path) -> None:
        os.makedirs(path, exist_ok=True)
        index = [{"name": n, "shape": list(t.data.shape)} for n, t in self.params.items()]
        manifest = {
            "format": 1,
            "config": self.config.to_dict(),
            "iteration": self.iteration,
            "seed": self.seed,
            "weights": index,
        }
        blob = b"".join(np.ascontiguousarray(t.data, dtype="<f4").tobytes()
                        for t in self.params.values())
        with open(os.path.join(path, _WEIGHTS), "wb") as f:
            f.write(blob)
        with open(os.path.join(path, _MANIFEST), "w") as f:
            json.dump(manifest, f, indent=1)

    @classmethod
    def load(cls, path, dtype=np.float32) -> "FaceSwapModel":
        mpath = os.path.join(path, _MANIFEST)
        wpath = os.path.join(path, _WEIGHTS)
        if not os.path.exists(mpath):
            raise ModelError(f"no checkpoint manifest at {mpath}")
        with open(mpath) as f:
            manifest = json.load(f)
        if manifest.get("format") != 1:
            raise ModelError(f"unsupported checkpoint format {manifest.get('format')!r}")
        config = ModelConfig.from_dict(manifest["config"])
        model = cls(config, seed=int(manifest["seed"]), dtype=dtype)
        model.iteration = int(manifest["iteration"])

        index = manifest["weights"]
        names = [e["name"] for e in index]
        if names != list(model.params):
            missing = set(model.params) - set(names)
            extra = set(names) - set(model.params)
            raise ModelError(
                f"checkpoint weight index does not match topology; "
                f"missing {sorted(missing)}, unexpected {sorted(extra)}")
        raw = np.fromfile(wpath, dtype="<f4")
        total = sum(int(np.prod(e["shape"])) for e in index)
        if raw.size != total:
            raise ModelError(
                f"weights.bin holds {raw.size} floats, manifest expects {total} (corrupt checkpoint)")
        off = 0
        for entry in index:
            name, shape = entry["name"], tuple(entry["shape"])
            t = model.params[name]
            if shape != t.data.shape:
                raise ModelError(
                    f"checkpoint tensor {name!r} has shape {shape}, "
                    f"topology expects {t.data.shape}")
            n = int(np.prod(shape))
            t.data = raw[off:off + n].reshape(shape).astype(dtype)
            off += n
        return model


def build(config: ModelConfig, seed: int, dtype=np.float32, cai: bool = True) -> FaceSwapModel:
    return FaceSwapModel(config, seed, dtype=dtype, cai=cai)

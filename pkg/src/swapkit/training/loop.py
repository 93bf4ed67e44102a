"""Seeded training loop over aligned face datasets.

Every iteration draws its randomness from a stream keyed by (seed,
iteration), so a run is a pure function of the config and datasets:
re-running, or resuming from a checkpoint at any iteration, replays the
exact same batches, augmentations and dropout masks.

Draw order inside one iteration is fixed: src indices, dst indices, src
flips, src scales, dst flips, dst scales, then any learning-rate dropout
masks inside the optimizer. Nothing else consumes the stream, so turning
the latent or adversarial terms on or off never shifts the data sequence;
paired ablation runs stay sample-for-sample comparable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from swapkit import imgcore
from swapkit.autograd import Tensor, ops
from swapkit.geometry import N_LANDMARKS
from swapkit.models import FaceSwapModel
from .config import TrainConfig
from .gan import PatchDiscriminator, gan_step
from .losses import mixed_loss, trueface_loss
from .optim import AdamState, adam_step
from .weights import batch_weight_maps

FLIP_PROB = 0.5
SCALE_JITTER = 0.05

TRAIN_STATE_NAME = "train_state.json"
OPTIM_NAME = "optim.bin"
DISC_NAME = "disc.bin"


class TrainError(RuntimeError):
    pass


@dataclass
class FaceDataset:
    """Aligned faces with their masks and crop-space landmarks.

    images: (n, res, res, 3) floats in [0, 1]; masks: (n, res, res) in
    [0, 1]; landmarks: (n, 68, 2) pixel coordinates inside the crop.
    """

    images: np.ndarray
    masks: np.ndarray
    landmarks: np.ndarray

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float32)
        self.masks = np.asarray(self.masks, dtype=np.float32)
        self.landmarks = np.asarray(self.landmarks, dtype=np.float64)
        n = self.images.shape[0] if self.images.ndim == 4 else 0
        if n == 0:
            raise TrainError("dataset is empty")
        if self.images.ndim != 4 or self.images.shape[3] != 3 \
                or self.images.shape[1] != self.images.shape[2]:
            raise TrainError(
                f"images must be (n, res, res, 3), got {self.images.shape}")
        res = self.images.shape[1]
        if self.masks.shape != (n, res, res):
            raise TrainError(
                f"masks must be ({n}, {res}, {res}), got {self.masks.shape}")
        if self.landmarks.shape != (n, N_LANDMARKS, 2):
            raise TrainError(
                f"landmarks must be ({n}, {N_LANDMARKS}, 2), got {self.landmarks.shape}")
        if self.images.min() < 0 or self.images.max() > 1:
            raise TrainError("image values must lie in [0, 1]")

    @property
    def resolution(self) -> int:
        return int(self.images.shape[1])

    def __len__(self) -> int:
        return int(self.images.shape[0])


@dataclass
class LossReport:
    """Per-iteration loss components.

    src/dst hold the raw (unweighted) component values plus a "total" key
    equal to the weighted sum; "disc" is the adversary's own loss or None.
    """

    iteration: int
    src: dict
    dst: dict
    disc: float | None = None

    def to_json_dict(self) -> dict:
        return {"iteration": self.iteration, "src": self.src,
                "dst": self.dst, "disc": self.disc}


def _augment_batch(data: FaceDataset, idx, flips, scales, size: int):
    """Flip/scale the selected samples with one composed warp each.

    Returns (images NCHW f32, masks (b,1,res,res) f32, landmarks (b,68,2)).
    Flipped landmarks keep their original indexing; downstream only needs
    the polygon outlines, not left/right identity.
    """
    b = len(idx)
    imgs = np.empty((b, 3, size, size), dtype=np.float32)
    masks = np.empty((b, 1, size, size), dtype=np.float32)
    lms = np.empty((b, N_LANDMARKS, 2), dtype=np.float64)
    c = (size - 1) / 2.0
    for j, (i, flip, s) in enumerate(zip(idx, flips, scales)):
        f = -1.0 if flip else 1.0
        if flip or s != 1.0:
            # pull matrix: output pixel -> source pixel, inverse of
            # q' = c + s * diag(f, 1) * (q - c)
            inv = 1.0 / s
            m = np.array([[inv * f, 0.0, c - inv * f * c],
                          [0.0, inv, c - inv * c]])
            im = imgcore.warp_affine(data.images[i], m, size, size)
            mk = imgcore.warp_affine(data.masks[i], m, size, size)[:, :, 0]
            lm = data.landmarks[i] - c
            lm = np.stack([s * f * lm[:, 0], s * lm[:, 1]], axis=1) + c
        else:
            im = data.images[i]
            mk = data.masks[i]
            lm = data.landmarks[i]
        imgs[j] = np.asarray(im, dtype=np.float32).transpose(2, 0, 1)
        masks[j, 0] = np.asarray(mk, dtype=np.float32)
        lms[j] = lm
    return imgs, masks, lms


def _iteration_rng(seed: int, iteration: int):
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(2, iteration)))


def _disc_seed(seed: int):
    return np.random.SeedSequence(entropy=seed, spawn_key=(1,))


def _trueface_pair(latents: dict, structure: str):
    if structure == "df":
        return latents["src"], latents["dst"]
    return latents["src_ab"], latents["dst_ab"]


def save_train_state(path, model: FaceSwapModel, model_state: AdamState,
                     disc, disc_state) -> None:
    """Checkpoint the model plus everything needed for bit-exact resume."""
    path = Path(path)
    model.save(path)
    names = [n for n, _ in model.named_parameters()]
    (path / OPTIM_NAME).write_bytes(model_state.pack(names))
    state = {"format": 1, "iteration": model.iteration,
             "adam_t": model_state.t, "has_disc": disc is not None}
    if disc is not None:
        state["disc_adam_t"] = disc_state.t
        disc_names = [n for n, _ in disc.named_parameters()]
        blob = disc.pack() + disc_state.pack(disc_names)
        (path / DISC_NAME).write_bytes(blob)
    text = json.dumps(state, indent=1, sort_keys=True) + "\n"
    (path / TRAIN_STATE_NAME).write_text(text)


def _load_train_state(path, model: FaceSwapModel, cfg: TrainConfig):
    path = Path(path)
    state_file = path / TRAIN_STATE_NAME
    if not state_file.exists():
        raise TrainError(
            f"model is at iteration {model.iteration} but {state_file} is missing; "
            "cannot resume without optimizer state")
    state = json.loads(state_file.read_text())
    if state.get("iteration") != model.iteration:
        raise TrainError(
            f"optimizer state is from iteration {state.get('iteration')}, "
            f"model is at {model.iteration}")
    named = model.named_parameters()
    model_state = AdamState.for_params(named)
    model_state.unpack((path / OPTIM_NAME).read_bytes(),
                       [(n, p.data.shape) for n, p in named])
    model_state.t = int(state["adam_t"])
    disc = disc_state = None
    if cfg.gan_weight > 0:
        if not state.get("has_disc"):
            raise TrainError("config enables the adversary but the checkpoint has none")
        disc = PatchDiscriminator(in_channels=3, seed=_disc_seed(cfg.seed))
        disc_state = AdamState.for_params(disc.named_parameters())
        blob = (path / DISC_NAME).read_bytes()
        w_bytes = sum(p.data.size for _, p in disc.named_parameters()) * 4
        disc.unpack(blob[:w_bytes])
        disc_state.unpack(blob[w_bytes:],
                          [(n, p.data.shape) for n, p in disc.named_parameters()])
        disc_state.t = int(state["disc_adam_t"])
    return model_state, disc, disc_state


def train(model: FaceSwapModel, src_data: FaceDataset, dst_data: FaceDataset,
          cfg: TrainConfig, checkpoint_dir=None, log_path=None,
          sink=None) -> list[LossReport]:
    """Run (or resume) training up to cfg.iterations.

    Starts from model.iteration; a freshly built model starts at 0, a
    loaded checkpoint continues where it stopped (requiring the optimizer
    state saved next to it). Checkpoints land in checkpoint_dir every
    cfg.checkpoint_every iterations and at the end. Reports go to the
    returned list, to sink (if given) per iteration, and as JSON lines
    appended to log_path (if given).
    """
    res = model.config.resolution
    for side, data in (("src", src_data), ("dst", dst_data)):
        if data.resolution != res:
            raise TrainError(
                f"{side} dataset resolution {data.resolution} != model {res}")
    if model.iteration >= cfg.iterations:
        return []
    if model.iteration > 0:
        if checkpoint_dir is None:
            raise TrainError("resuming needs the checkpoint_dir with optimizer state")
        model_state, disc, disc_state = _load_train_state(checkpoint_dir, model, cfg)
    else:
        model_state = AdamState.for_params(model.named_parameters())
        disc = disc_state = None
        if cfg.gan_weight > 0:
            disc = PatchDiscriminator(in_channels=3, seed=_disc_seed(cfg.seed))
            disc_state = AdamState.for_params(disc.named_parameters())

    log_file = open(log_path, "a") if log_path else None
    reports: list[LossReport] = []
    try:
        for i in range(model.iteration, cfg.iterations):
            rng = _iteration_rng(cfg.seed, i)
            src_idx = rng.integers(0, len(src_data), cfg.batch_size)
            dst_idx = rng.integers(0, len(dst_data), cfg.batch_size)
            if cfg.augment:
                src_flip = rng.random(cfg.batch_size) < FLIP_PROB
                src_scale = rng.uniform(1.0 - SCALE_JITTER, 1.0 + SCALE_JITTER,
                                        cfg.batch_size)
                dst_flip = rng.random(cfg.batch_size) < FLIP_PROB
                dst_scale = rng.uniform(1.0 - SCALE_JITTER, 1.0 + SCALE_JITTER,
                                        cfg.batch_size)
            else:
                src_flip = dst_flip = np.zeros(cfg.batch_size, dtype=bool)
                src_scale = dst_scale = np.ones(cfg.batch_size)

            xs, ms, lms = _augment_batch(src_data, src_idx, src_flip, src_scale, res)
            xd, md, lmd = _augment_batch(dst_data, dst_idx, dst_flip, dst_scale, res)
            w_src = batch_weight_maps(lms, res, cfg.eye_weight)
            w_dst = batch_weight_maps(lmd, res, cfg.eye_weight)

            t_src = Tensor(xs)
            t_dst = Tensor(xd)
            fwd = model.forward_train(t_src, t_dst)
            l_src, parts_src = mixed_loss(
                fwd.pred_src, t_src, fwd.pred_src_mask, Tensor(ms), w_src, cfg)
            l_dst, parts_dst = mixed_loss(
                fwd.pred_dst, t_dst, fwd.pred_dst_mask, Tensor(md), w_dst, cfg)
            grand = ops.add(l_src, l_dst)

            if cfg.trueface_weight > 0:
                z_s, z_d = _trueface_pair(fwd.latents, model.config.structure)
                tf = trueface_loss(z_s, z_d, model.config.structure)
                parts_src["trueface"] = tf.item()
                grand = ops.add(grand, ops.mul_scalar(tf, cfg.trueface_weight))
            else:
                parts_src["trueface"] = 0.0

            d_val = None
            if cfg.gan_weight > 0:
                gen_term, d_val = gan_step(fwd.pred_dst, t_dst, disc, disc_state, cfg)
                parts_dst["gan"] = gen_term.item() / cfg.gan_weight
                grand = ops.add(grand, gen_term)
            else:
                parts_dst["gan"] = 0.0

            total = float(grand.item())
            if not np.isfinite(total):
                raise TrainError(
                    f"non-finite loss at iteration {i}: src={parts_src} dst={parts_dst}")

            model.zero_grad()
            grand.backward()
            adam_step(model.named_parameters(), model_state, cfg.lr, cfg.beta1,
                      cfg.beta2, keep=cfg.lr_dropout_keep, rng=rng)
            model.iteration = i + 1

            parts_src["total"] = (cfg.dssim_weight * parts_src["dssim"]
                                  + cfg.mse_weight * parts_src["mse"]
                                  + cfg.mask_loss_weight * parts_src["mask"]
                                  + cfg.trueface_weight * parts_src["trueface"])
            parts_dst["total"] = (cfg.dssim_weight * parts_dst["dssim"]
                                  + cfg.mse_weight * parts_dst["mse"]
                                  + cfg.mask_loss_weight * parts_dst["mask"]
                                  + cfg.gan_weight * parts_dst["gan"])
            report = LossReport(model.iteration, parts_src, parts_dst, d_val)
            reports.append(report)
            if sink is not None:
                sink(report)
            if log_file is not None:
                log_file.write(json.dumps(report.to_json_dict()) + "\n")

            if checkpoint_dir is not None and (
                    model.iteration % cfg.checkpoint_every == 0
                    or model.iteration == cfg.iterations):
                save_train_state(checkpoint_dir, model, model_state, disc, disc_state)
    finally:
        if log_file is not None:
            log_file.close()
    return reports

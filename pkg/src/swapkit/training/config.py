"""Training hyperparameters."""

from __future__ import annotations

from dataclasses import dataclass, asdict


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 5e-5
    beta1: float = 0.5
    beta2: float = 0.999
    batch_size: int = 4
    iterations: int = 1000
    dssim_weight: float = 10.0       # alpha: perceptual half of the mixed loss
    mse_weight: float = 10.0         # beta: pixel half
    eye_weight: float = 3.0          # weight-map value inside eye polygons
    mask_loss_weight: float = 1.0
    trueface_weight: float = 0.01    # 0 turns the latent pull off
    gan_weight: float = 0.1          # 0 turns the patch GAN off
    lr_dropout_keep: float = 1.0     # 0.7 is the usual on-setting; 1 = plain Adam
    cai_init: bool = True
    seed: int = 0
    checkpoint_every: int = 500
    augment: bool = True             # random flips and +-5% scale jitter

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError(f"betas must lie in (0, 1), got {self.beta1}, {self.beta2}")
        if self.batch_size < 1 or self.iterations < 0:
            raise ValueError("batch_size must be >= 1 and iterations >= 0")
        for field in ("dssim_weight", "mse_weight", "eye_weight",
                      "mask_loss_weight", "trueface_weight", "gan_weight"):
            if getattr(self, field) < 0:
                raise ValueError(f"{field} must be nonnegative")
        if not (0 < self.lr_dropout_keep <= 1):
            raise ValueError(f"lr_dropout_keep must be in (0, 1], got {self.lr_dropout_keep}")
        if self.checkpoint_every < 1:
            raise ValueError("checkpoint_every must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

"""Training configuration."""

from __future__ import annotations

from dataclasses import asdict, dataclass

MODEL_TIERS = {
    # name: (encoder depth, width)
    "tiny": (2, 64),
    "small": (4, 128),
    "medium": (6, 192),
    "large": (8, 256),
}


@dataclass(frozen=True)
class TrainConfig:
    model_size: str = "tiny"
    lr: float = 4e-5
    weight_decay: float = 1e-2
    adam_epsilon: float = 1e-3
    batch_size: int = 16
    epochs: int = 20          # toy default; the stock recipe runs 200
    eval_every_steps: int = 500
    log_every_steps: int = 100
    clamp_lo_um: float = 0.0
    clamp_hi_um: float = 5.0
    img_size: int = 128
    patch_size: int = 8
    eval_fraction: float = 0.1
    silog_lambda: float = 0.85
    rotations: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.model_size not in MODEL_TIERS:
            raise ValueError(f"model_size must be one of {sorted(MODEL_TIERS)}")
        for name in ("lr", "weight_decay", "adam_epsilon", "batch_size", "epochs",
                     "eval_every_steps", "log_every_steps", "img_size", "patch_size"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.clamp_lo_um >= self.clamp_hi_um:
            raise ValueError("clamp bounds must be ordered")
        if not 0.0 < self.eval_fraction < 1.0:
            raise ValueError("eval_fraction must lie in (0, 1)")
        if self.img_size % self.patch_size != 0:
            raise ValueError("img_size must be a multiple of patch_size")

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "TrainConfig":
        known = {k: v for k, v in d.items() if k in TrainConfig.__dataclass_fields__}
        return TrainConfig(**known)

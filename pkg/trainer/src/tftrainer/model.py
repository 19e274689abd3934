"""Patch-embedding transformer that regresses a per-pixel thickness map.

The head predicts log-thickness per patch token (bias initialized at
ln(1000 nm)), which is bilinearly upsampled and exponentiated, so outputs are
always positive. Dropout stays at zero: predictions must not depend on
batching and repeat runs must match.
"""

from __future__ import annotations

import math

import torch
from torch import nn

from .config import MODEL_TIERS, TrainConfig


class DepthRegressor(nn.Module):
    def __init__(self, depth: int, width: int, patch_size: int = 8,
                 img_size: int = 128, heads: int = 4):
        super().__init__()
        if width % heads != 0:
            raise ValueError("width must be divisible by the head count")
        self.patch_size = patch_size
        self.img_size = img_size
        n_patches = (img_size // patch_size) ** 2
        self.embed = nn.Conv2d(3, width, kernel_size=patch_size, stride=patch_size)
        self.pos = nn.Parameter(torch.zeros(1, n_patches, width))
        layer = nn.TransformerEncoderLayer(
            d_model=width,
            nhead=heads,
            dim_feedforward=4 * width,
            dropout=0.0,
            batch_first=True,
            norm_first=True,
        )
        self.encoder = nn.TransformerEncoder(layer, num_layers=depth,
                                             enable_nested_tensor=False)
        self.norm = nn.LayerNorm(width)
        self.head = nn.Linear(width, 1)
        nn.init.trunc_normal_(self.pos, std=0.02)
        # a dead-zero head would block encoder gradients for hundreds of steps
        # at the stock learning rate; a small random init lets features train
        # from step one while keeping the initial output near 1000 nm
        nn.init.trunc_normal_(self.head.weight, std=0.02)
        nn.init.constant_(self.head.bias, math.log(1000.0))

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        """images (B, 3, H, W) in [0, 1] -> positive thickness map (B, H, W) in nm."""
        b, _, h, w = images.shape
        if h != self.img_size or w != self.img_size:
            raise ValueError(f"expected {self.img_size}x{self.img_size} input, got {h}x{w}")
        tokens = self.embed(images).flatten(2).transpose(1, 2)  # (B, N, width)
        tokens = self.encoder(tokens + self.pos)
        log_h = self.head(self.norm(tokens))  # (B, N, 1)
        side = self.img_size // self.patch_size
        grid = log_h.transpose(1, 2).reshape(b, 1, side, side)
        full = nn.functional.interpolate(
            grid, size=(self.img_size, self.img_size), mode="bilinear", align_corners=False
        )
        return torch.exp(full.squeeze(1))


def build_model(cfg: TrainConfig) -> DepthRegressor:
    depth, width = MODEL_TIERS[cfg.model_size]
    return DepthRegressor(depth, width, patch_size=cfg.patch_size, img_size=cfg.img_size)

"""Inference and prediction export in the filmetric pair format."""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .data import center_crop
from .metrics import clamp_prediction


def predict(model, image_u8: np.ndarray, clamp_lo_um=0.0, clamp_hi_um=5.0,
            device="cpu"):
    """Single forward pass on one HxWx3 uint8 image; returns (map nm, seconds)."""
    size = model.img_size
    crop = center_crop(image_u8, size)
    x = torch.from_numpy(np.ascontiguousarray(crop)).float().permute(2, 0, 1)[None] / 255.0
    t0 = time.perf_counter()
    with torch.no_grad():
        out = model(x.to(device))[0].cpu().numpy()
    seconds = time.perf_counter() - t0
    return clamp_prediction(out, clamp_lo_um, clamp_hi_um), seconds


def export_predictions(model, images_dir, out_dir, clamp_lo_um=0.0, clamp_hi_um=5.0,
                       device="cpu") -> list[str]:
    """Predict every `*_img.png` under images_dir into `<id>_pred.png` + JSON."""
    images_dir = Path(images_dir)
    out_dir = Path(out_dir)
    paths = sorted(images_dir.glob("*_img.png"))
    if not paths:
        raise FileNotFoundError(f"no *_img.png files in {images_dir}")
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for path in paths:
        stem = path.name[: -len("_img.png")]
        img = np.array(Image.open(path).convert("RGB"))
        pred, seconds = predict(model, img, clamp_lo_um, clamp_hi_um, device)
        Image.fromarray(np.rint(pred).astype(np.uint16)).save(out_dir / f"{stem}_pred.png")
        with open(out_dir / f"{stem}_pred.json", "w", encoding="utf-8") as fh:
            json.dump(
                {"id": stem, "seconds": seconds,
                 "pred_min_nm": float(pred.min()), "pred_max_nm": float(pred.max()),
                 "mean_nm": float(pred.mean())},
                fh, sort_keys=True, indent=1,
            )
        written.append(stem)
    return written

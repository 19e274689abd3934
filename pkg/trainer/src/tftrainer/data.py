"""Reader for filmetric-format dataset directories.

Only the on-disk contract is used: `manifest.json` plus
`items/<id>_img.png` (8-bit RGB), `items/<id>_gt.png` (16-bit nm) and
`items/<id>_meta.json` (validity RLE). No toolkit import.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

MANIFEST_NAME = "manifest.json"
ITEMS_SUBDIR = "items"


def decode_rle(runs, shape):
    total = int(np.prod(shape))
    flat = np.empty(total, dtype=bool)
    pos = 0
    value = True
    for run in runs:
        flat[pos:pos + run] = value
        pos += run
        value = not value
    if pos != total:
        raise ValueError("validity RLE does not cover the image")
    return flat.reshape(shape)


def load_pairs(dataset_dir):
    """All (image u8 HxWx3, gt nm float HxW, valid bool HxW) triples, manifest order."""
    root = Path(dataset_dir)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.exists():
        raise FileNotFoundError(f"no {MANIFEST_NAME} in {dataset_dir}")
    manifest = json.loads(manifest_path.read_text())
    items_dir = root / ITEMS_SUBDIR
    out = []
    for item in manifest["items"]:
        for pair in item["pairs"]:
            pid = pair["pair_id"]
            img = np.array(Image.open(items_dir / f"{pid}_img.png").convert("RGB"))
            gt = np.array(Image.open(items_dir / f"{pid}_gt.png")).astype(np.float64)
            meta = json.loads((items_dir / f"{pid}_meta.json").read_text())
            valid = decode_rle(meta["valid_rle"], gt.shape) if "valid_rle" in meta \
                else np.ones(gt.shape, dtype=bool)
            out.append((pid, img, gt, valid))
    if not out:
        raise FileNotFoundError(f"dataset {dataset_dir} is empty")
    return out


def center_crop(arr, size):
    h, w = arr.shape[:2]
    if h < size or w < size:
        raise ValueError(f"image {h}x{w} smaller than crop {size}")
    y0 = (h - size) // 2
    x0 = (w - size) // 2
    return arr[y0:y0 + size, x0:x0 + size]


class ArrayDataset:
    """In-memory dataset of fixed-size crops with deterministic batching."""

    def __init__(self, pairs, img_size: int):
        self.ids = [p[0] for p in pairs]
        self.images = np.stack([center_crop(p[1], img_size) for p in pairs])
        self.gts = np.stack([center_crop(p[2], img_size) for p in pairs])
        self.valids = np.stack([center_crop(p[3], img_size) for p in pairs])

    def __len__(self):
        return len(self.ids)

    def batches(self, batch_size: int, rng: np.random.Generator | None = None,
                rotations: bool = False):
        """Yield (images, gts, valids) batches; shuffled/rotated when an rng is given."""
        order = np.arange(len(self.ids))
        if rng is not None:
            order = rng.permutation(order)
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            imgs = self.images[idx]
            gts = self.gts[idx]
            valids = self.valids[idx]
            if rotations and rng is not None:
                ks = rng.integers(0, 4, size=len(idx))
                imgs = np.stack([np.rot90(a, k) for a, k in zip(imgs, ks)])
                gts = np.stack([np.rot90(a, k) for a, k in zip(gts, ks)])
                valids = np.stack([np.rot90(a, k) for a, k in zip(valids, ks)])
            yield imgs, gts, valids


def train_eval_split(pairs, eval_fraction: float, seed: int):
    """Deterministic shuffle-split; eval gets at least one item."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(pairs))
    n_eval = max(1, int(round(eval_fraction * len(pairs))))
    if n_eval >= len(pairs):
        n_eval = len(pairs) - 1
    eval_idx = set(order[:n_eval].tolist())
    train = [p for i, p in enumerate(pairs) if i not in eval_idx]
    heldout = [p for i, p in enumerate(pairs) if i in eval_idx]
    return train, heldout

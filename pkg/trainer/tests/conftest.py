import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image


def write_pair(items_dir: Path, pair_id: str, img_u8: np.ndarray, gt_nm: np.ndarray):
    items_dir.mkdir(parents=True, exist_ok=True)
    Image.fromarray(img_u8).save(items_dir / f"{pair_id}_img.png")
    Image.fromarray(np.rint(gt_nm).astype(np.uint16)).save(items_dir / f"{pair_id}_gt.png")
    meta = {
        "id": pair_id,
        "field_min_nm": float(gt_nm.min()),
        "field_max_nm": float(gt_nm.max()),
        "valid_rle": [int(gt_nm.size)],
        "shape": [int(gt_nm.shape[0]), int(gt_nm.shape[1])],
    }
    (items_dir / f"{pair_id}_meta.json").write_text(json.dumps(meta, sort_keys=True))
    return {
        "pair_id": pair_id,
        "files": {},
        "field_min_nm": meta["field_min_nm"],
        "field_max_nm": meta["field_max_nm"],
        "field_mean_nm": float(gt_nm.mean()),
    }


def write_dataset(root: Path, pairs):
    """Minimal dataset directory in the documented manifest/pair format."""
    items = []
    for i, (img, gt) in enumerate(pairs):
        pid = f"{i:06d}"
        rec = write_pair(root / "items", pid, img, gt)
        items.append({"id": pid, "family": "synthetic", "seed": i, "pairs": [rec]})
    manifest = {
        "format": "filmetric-dataset-v1",
        "toolkit_version": "test",
        "colormap_sha256": "",
        "family_counts": {"perlin": 0, "gaussian": 0, "experimental": len(items)},
        "spec": {},
        "items": items,
    }
    (root / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1))
    return root


def smooth_coded_pairs(count: int, size: int = 128, seed: int = 0):
    """Smooth thickness maps with a monotone color encoding: easily learnable
    image->thickness pairs for gradient-flow and overfit sanity checks."""
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:size, 0:size] / float(size)
    out = []
    for _ in range(count):
        a, b = rng.uniform(0.5, 2.0, 2)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        unit = 0.5 + 0.5 * np.sin(2.0 * np.pi * (a * xs + b * ys) / 4.0 + phase)
        gt = 600.0 + 1800.0 * unit
        t = (gt - 500.0) / 2500.0
        img = np.stack([255 * t, 255 * (1 - t), 128 + 100 * t], axis=-1)
        out.append((np.rint(np.clip(img, 0, 255)).astype(np.uint8), gt))
    return out


@pytest.fixture()
def easy_dataset(tmp_path):
    return write_dataset(tmp_path / "easy", smooth_coded_pairs(10))

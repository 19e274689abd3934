"""On-disk pair format shared by datasets, reconstructions and trainers.

A pair is `<id>_img.png` (8-bit RGB), `<id>_gt.png` (16-bit grayscale,
value = round(nm)) and `<id>_meta.json` carrying the exact float min/max of
the field, a run-length encoded validity mask, and generator provenance.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DataIOError
from .fieldgen import ThicknessField
from .synth import Interferogram

IMG_SUFFIX = "_img.png"
GT_SUFFIX = "_gt.png"
META_SUFFIX = "_meta.json"


def rle_encode_mask(mask: np.ndarray) -> list[int]:
    """Row-major run lengths of alternating values, first run counts True pixels."""
    flat = np.asarray(mask, dtype=bool).ravel()
    if flat.size == 0:
        return []
    boundaries = np.flatnonzero(np.diff(flat)) + 1
    runs = np.diff(np.concatenate([[0], boundaries, [flat.size]])).tolist()
    if not flat[0]:
        runs = [0] + runs
    return [int(r) for r in runs]


def rle_decode_mask(runs: list[int], shape: tuple[int, int]) -> np.ndarray:
    total = int(np.prod(shape))
    flat = np.empty(total, dtype=bool)
    pos = 0
    value = True
    for run in runs:
        flat[pos:pos + run] = value
        pos += run
        value = not value
    if pos != total:
        raise DataIOError(f"validity RLE covers {pos} pixels, expected {total}")
    return flat.reshape(shape)


# Fast deflate: datasets are written in bulk and read back rarely, so trade
# ~20% file size for several-fold faster encoding.
_PNG_COMPRESS_LEVEL = 1


def save_field_png(field_values: np.ndarray, path) -> None:
    """16-bit grayscale PNG with value = round(nm)."""
    arr = np.rint(np.asarray(field_values, dtype=np.float64)).astype(np.uint16)
    Image.fromarray(arr).save(path, compress_level=_PNG_COMPRESS_LEVEL)


def load_field_png(path) -> np.ndarray:
    try:
        arr = np.array(Image.open(path))
    except OSError as exc:
        raise DataIOError(f"cannot read field PNG {path}: {exc}") from exc
    return arr.astype(np.float64)


def save_image_png(img: Interferogram, path) -> None:
    Image.fromarray(img.pixels).save(path, compress_level=_PNG_COMPRESS_LEVEL)


def load_image_png(path) -> Interferogram:
    try:
        arr = np.array(Image.open(path).convert("RGB"))
    except OSError as exc:
        raise DataIOError(f"cannot read image PNG {path}: {exc}") from exc
    return Interferogram(pixels=arr.astype(np.uint8))


def save_pair(
    out_dir,
    pair_id: str,
    img: Interferogram,
    field: ThicknessField,
    meta_extra: dict | None = None,
) -> dict[str, str]:
    """Write the three files; returns {filename: sha256} for manifesting."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = {
        "img": f"{pair_id}{IMG_SUFFIX}",
        "gt": f"{pair_id}{GT_SUFFIX}",
        "meta": f"{pair_id}{META_SUFFIX}",
    }
    save_image_png(img, out_dir / names["img"])
    save_field_png(field.values, out_dir / names["gt"])
    meta = {
        "id": pair_id,
        "field_min_nm": float(field.values.min()),
        "field_max_nm": float(field.values.max()),
        "valid_rle": rle_encode_mask(field.valid),
        "shape": [int(field.height), int(field.width)],
    }
    if meta_extra:
        meta.update(meta_extra)
    with open(out_dir / names["meta"], "w", encoding="utf-8") as fh:
        json.dump(meta, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return {name: sha256_file(out_dir / name) for name in names.values()}


def load_pair(dir_path, pair_id: str) -> tuple[Interferogram, ThicknessField, dict]:
    dir_path = Path(dir_path)
    img = load_image_png(dir_path / f"{pair_id}{IMG_SUFFIX}")
    values = load_field_png(dir_path / f"{pair_id}{GT_SUFFIX}")
    meta_path = dir_path / f"{pair_id}{META_SUFFIX}"
    meta: dict = {}
    valid = None
    if meta_path.exists():
        with open(meta_path, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
        if "valid_rle" in meta:
            valid = rle_decode_mask(meta["valid_rle"], values.shape)
    field = ThicknessField(values=values, valid=valid)
    return img, field, meta


def list_pair_ids(dir_path) -> list[str]:
    """Sorted ids of complete (img, gt) pairs below dir_path."""
    dir_path = Path(dir_path)
    if not dir_path.is_dir():
        raise DataIOError(f"not a directory: {dir_path}")
    imgs = {p.name[: -len(IMG_SUFFIX)] for p in dir_path.glob(f"*{IMG_SUFFIX}")}
    gts = {p.name[: -len(GT_SUFFIX)] for p in dir_path.glob(f"*{GT_SUFFIX}")}
    return sorted(imgs & gts)


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()

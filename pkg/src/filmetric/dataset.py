"""Mixed dataset composition with manifests and deterministic regeneration.

Items are planned up front (family by index range, per-item seed by splitmix
hash of the master seed), so generation parallelizes over items and the
output is byte-identical for any thread count. The manifest is written last
and doubles as the completion marker.
"""

from __future__ import annotations

import dataclasses
import functools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, DataIOError
from .fieldgen import (
    GaussianParams,
    PerlinParams,
    RangeConstraint,
    apply_range,
    derive_seed,
    gen_gaussian,
    gen_perlin,
)
from .optics import Colormap, colormap_sha256, default_colormap, load_colormap
from .pairio import list_pair_ids, load_pair, save_pair, sha256_file
from .synth import AugmentConfig, augment, render

MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT = "filmetric-dataset-v1"
ITEMS_SUBDIR = "items"

FAMILIES = ("perlin", "gaussian", "experimental")


@dataclass(frozen=True)
class DatasetSpec:
    """What to generate: counts, family mix, seeds, augmentation and colormap."""

    total_count: int
    frac_perlin: float = 0.5
    frac_gaussian: float = 0.5
    frac_experimental: float = 0.0
    master_seed: int = 12345
    field_size: int = 256
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    range_constraint: RangeConstraint = field(default_factory=RangeConstraint)
    colormap_ref: str | None = None
    experimental_source: str | None = None
    enforce_mix_policy: bool = True

    def __post_init__(self):
        if self.total_count < 1:
            raise ConfigError("total_count must be >= 1")
        fracs = (self.frac_perlin, self.frac_gaussian, self.frac_experimental)
        if any(f < 0 for f in fracs):
            raise ConfigError("fractions must be non-negative")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ConfigError("fractions must sum to 1 within 1e-9")
        if self.enforce_mix_policy:
            if not 0.25 <= self.frac_perlin <= 0.50:
                raise ConfigError("frac_perlin outside [0.25, 0.50] (set enforce_mix_policy=False to override)")
            if not 0.25 <= self.frac_gaussian <= 0.50:
                raise ConfigError("frac_gaussian outside [0.25, 0.50] (set enforce_mix_policy=False to override)")
            if not 0.0 <= self.frac_experimental <= 0.50:
                raise ConfigError("frac_experimental outside [0, 0.50] (set enforce_mix_policy=False to override)")
        if self.field_size < 16:
            raise ConfigError("field_size must be >= 16")

    def to_json_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["augment"]["blur_sigma"] = list(d["augment"]["blur_sigma"])
        d["augment"]["pupil_diameter_px"] = list(d["augment"]["pupil_diameter_px"])
        return d

    @staticmethod
    def from_json_dict(d: dict) -> "DatasetSpec":
        d = dict(d)
        aug = d.get("augment", {})
        if isinstance(aug, dict):
            aug = dict(aug)
            for key in ("blur_sigma", "pupil_diameter_px"):
                if key in aug:
                    aug[key] = tuple(aug[key])
            d["augment"] = AugmentConfig(**aug)
        rc = d.get("range_constraint", {})
        if isinstance(rc, dict):
            d["range_constraint"] = RangeConstraint(**rc)
        return DatasetSpec(**d)


def family_counts(total: int, fracs: tuple[float, float, float]) -> tuple[int, int, int]:
    """Largest-remainder rounding of frac*total so counts sum to total exactly."""
    raw = [f * total for f in fracs]
    base = [int(np.floor(r + 1e-9)) for r in raw]
    leftover = total - sum(base)
    order = sorted(range(3), key=lambda i: (-(raw[i] - base[i]), i))
    for i in range(leftover):
        base[order[i % 3]] += 1
    return tuple(base)


def _family_of(index: int, counts: tuple[int, int, int]) -> str:
    if index < counts[0]:
        return "perlin"
    if index < counts[0] + counts[1]:
        return "gaussian"
    return "experimental"


def _resolve_colormap(spec: DatasetSpec) -> Colormap:
    if spec.colormap_ref:
        return load_colormap(spec.colormap_ref)
    return default_colormap()


def generate_item(
    spec: DatasetSpec,
    index: int,
    colormap: Colormap,
    experimental_pool: list[str] | None = None,
):
    """Build item `index` in memory: list of (pair_id, AugmentedPair, meta) tuples.

    Pure function of (spec, index, colormap contents); this is what makes the
    manifest sufficient for random-access regeneration.
    """
    counts = family_counts(
        spec.total_count, (spec.frac_perlin, spec.frac_gaussian, spec.frac_experimental)
    )
    family = _family_of(index, counts)
    item_seed = derive_seed(spec.master_seed, index)
    rng = np.random.default_rng(item_seed)
    aug = replace(spec.augment, seed=derive_seed(item_seed, 3))

    if family == "experimental":
        if not experimental_pool:
            raise ConfigError("experimental items requested but no experimental source given")
        k = index - counts[0] - counts[1]
        source_id = experimental_pool[k % len(experimental_pool)]
        img, fld, _meta = load_pair(Path(spec.experimental_source), source_id)
        params_info = {"source_id": source_id}
    else:
        if family == "perlin":
            params = PerlinParams.sample(rng, seed=derive_seed(item_seed, 1))
            unit = gen_perlin(params, spec.field_size, spec.field_size)
        else:
            params = GaussianParams.sample(rng, seed=derive_seed(item_seed, 1))
            unit = gen_gaussian(params, spec.field_size, spec.field_size)
        fld = apply_range(unit, spec.range_constraint, seed=derive_seed(item_seed, 2))
        img = render(fld, colormap)
        params_info = dataclasses.asdict(params)

    pairs = augment(img, fld, aug)
    out = []
    for j, pair in enumerate(pairs):
        pair_id = f"{index:06d}" if len(pairs) == 1 else f"{index:06d}_c{j}"
        meta = {
            "family": family,
            "item_index": index,
            "item_seed": int(item_seed),
            "params": params_info,
            "ops": list(pair.ops),
        }
        out.append((pair_id, pair, meta))
    return out


def _write_item(spec, index, colormap=None, pool=None, items_dir=None) -> dict:
    pairs = generate_item(spec, index, colormap, pool)
    record_pairs = []
    for pair_id, pair, meta in pairs:
        checksums = save_pair(items_dir, pair_id, pair.image, pair.field, meta)
        record_pairs.append(
            {
                "pair_id": pair_id,
                "files": checksums,
                "field_min_nm": float(pair.field.values.min()),
                "field_max_nm": float(pair.field.values.max()),
                "field_mean_nm": float(pair.field.values.mean()),
            }
        )
    return {
        "id": f"{index:06d}",
        "family": pairs[0][2]["family"],
        "seed": pairs[0][2]["item_seed"],
        "pairs": record_pairs,
    }


def generate(spec: DatasetSpec, out_dir, threads: int = 1) -> dict:
    """Generate the dataset into out_dir; returns the manifest dict.

    Per-item work is embarrassingly parallel; records are assembled in index
    order afterwards, so the directory tree is identical for any `threads`.
    """
    counts = family_counts(
        spec.total_count, (spec.frac_perlin, spec.frac_gaussian, spec.frac_experimental)
    )
    pool = None
    if counts[2] > 0:
        if not spec.experimental_source:
            raise ConfigError("frac_experimental > 0 requires experimental_source")
        pool = list_pair_ids(spec.experimental_source)
        if not pool:
            raise DataIOError(f"no experimental pairs found in {spec.experimental_source}")

    colormap = _resolve_colormap(spec)
    out_dir = Path(out_dir)
    items_dir = out_dir / ITEMS_SUBDIR
    items_dir.mkdir(parents=True, exist_ok=True)

    indices = range(spec.total_count)
    worker = functools.partial(_write_item, spec, colormap=colormap, pool=pool, items_dir=items_dir)
    if threads <= 1:
        records = [worker(i) for i in indices]
    else:
        chunk = max(1, spec.total_count // (threads * 8))
        with ProcessPoolExecutor(max_workers=threads) as pool_exec:
            records = list(pool_exec.map(worker, indices, chunksize=chunk))

    manifest = {
        "format": MANIFEST_FORMAT,
        "toolkit_version": __version__,
        "colormap_sha256": colormap_sha256(colormap),
        "family_counts": {"perlin": counts[0], "gaussian": counts[1], "experimental": counts[2]},
        "spec": spec.to_json_dict(),
        "items": records,
    }
    with open(out_dir / MANIFEST_NAME, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return manifest


def read_manifest(dir_path) -> dict:
    path = Path(dir_path) / MANIFEST_NAME
    if not path.exists():
        raise DataIOError(f"no manifest in {dir_path}")
    with open(path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format") != MANIFEST_FORMAT:
        raise DataIOError(f"{path}: unknown manifest format {manifest.get('format')!r}")
    return manifest


def load(dir_path, verify: bool = True):
    """Yield (Interferogram, ThicknessField, validity mask) in manifest order."""
    dir_path = Path(dir_path)
    manifest = read_manifest(dir_path)
    items_dir = dir_path / ITEMS_SUBDIR
    for item in manifest["items"]:
        for pair_rec in item["pairs"]:
            if verify:
                for fname, digest in pair_rec["files"].items():
                    fpath = items_dir / fname
                    if not fpath.exists():
                        raise DataIOError(f"item {item['id']}: missing file {fname}")
                    if sha256_file(fpath) != digest:
                        raise DataIOError(f"item {item['id']}: checksum mismatch for {fname}")
            img, fld, _meta = load_pair(items_dir, pair_rec["pair_id"])
            yield img, fld, fld.valid

"""Command-line surface: colormap building, dataset synthesis, reconstruction,
evaluation and sweeps.

Every subcommand is deterministic given its flags (seeds are explicit, never
wall-clock), plots always have CSV twins, and exit codes distinguish config
errors (2), IO errors (3) and numerical failures (4).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import __version__, dataset, metrics, optics, pairio, reconstruct
from .errors import ConfigError, DataIOError, NumericalError
from .synth import AugmentConfig, Interferogram

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4

DEFAULT_SEED = 12345


def _read_config_file(path) -> dict:
    """JSON or simple `key = value` lines; '#' comments allowed."""
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return json.loads(text)
    out = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}: expected key = value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def _load_stack(path) -> optics.FilmStack:
    if path is None:
        return optics.FilmStack()
    cfg = _read_config_file(path)
    return optics.FilmStack(**cfg)


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("FILMETRIC_THREADS")
    return max(1, int(env)) if env else 1


def _write_csv(path, header: str, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")


def _hist_csv_svg(values, bins, rng, out_base: Path, xlabel: str) -> None:
    counts, edges = np.histogram(values, bins=bins, range=rng)
    _write_csv(
        out_base.with_suffix(".csv"),
        "bin_lo,bin_hi,count",
        [(f"{edges[i]:.9g}", f"{edges[i + 1]:.9g}", int(counts[i])) for i in range(len(counts))],
    )
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.bar(edges[:-1], counts, width=np.diff(edges), align="edge")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("count")
    fig.tight_layout()
    fig.savefig(out_base.with_suffix(".svg"))
    plt.close(fig)


# ---------------------------------------------------------------------------
# colormap


def cmd_colormap(args) -> int:
    stack = _load_stack(args.stack)
    illuminant = optics.load_curve(args.illuminant) if args.illuminant else optics.default_illuminant()
    filt = optics.load_curve(args.filter) if args.filter else optics.default_filter()
    if args.sensitivity_r or args.sensitivity_g or args.sensitivity_b:
        if not (args.sensitivity_r and args.sensitivity_g and args.sensitivity_b):
            raise ConfigError("provide all three sensitivity curves or none")
        sens = tuple(optics.load_curve(p) for p in (args.sensitivity_r, args.sensitivity_g, args.sensitivity_b))
    else:
        sens = optics.default_sensitivities()
    cmap = optics.build_colormap(
        stack, illuminant, filt, sens,
        grid_min_nm=args.grid_min, grid_max_nm=args.grid_max, grid_step_nm=args.grid_step,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    optics.save_colormap(cmap, out)
    preview = Path(args.preview) if args.preview else out.with_suffix(".png")
    strip = np.rint(255.0 * cmap.rgb[None, :, :]).astype(np.uint8)
    strip = np.repeat(strip, 48, axis=0)
    pairio.save_image_png(Interferogram(pixels=strip), preview)
    if args.csv:
        optics.colormap_to_csv(cmap, args.csv)
    print(f"colormap: {cmap.thickness_grid_nm.size} samples "
          f"[{cmap.grid_min:g}, {cmap.grid_max:g}] nm step {cmap.grid_step:g} -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth


def cmd_synth(args) -> int:
    spec_dict = _read_config_file(args.spec)
    spec = dataset.DatasetSpec.from_json_dict(spec_dict)
    out = Path(args.out)
    manifest = dataset.generate(spec, out, threads=_threads(args))
    means = [p["field_mean_nm"] for item in manifest["items"] for p in item["pairs"]]
    spans = [p["field_max_nm"] - p["field_min_nm"] for item in manifest["items"] for p in item["pairs"]]
    _hist_csv_svg(means, bins=40, rng=(0.0, 4000.0), out_base=out / "stats_mean_hist", xlabel="mean thickness (nm)")
    _hist_csv_svg(spans, bins=26, rng=(0.0, 2600.0), out_base=out / "stats_span_hist", xlabel="thickness span (nm)")
    counts = manifest["family_counts"]
    print(f"dataset: {spec.total_count} items -> {out} "
          f"(perlin {counts['perlin']}, gaussian {counts['gaussian']}, experimental {counts['experimental']})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# reconstruct


def _collect_inputs(input_path: Path) -> list[tuple[str, Path]]:
    if input_path.is_file():
        stem = input_path.name
        for suffix in (pairio.IMG_SUFFIX, ".png"):
            if stem.endswith(suffix):
                stem = stem[: -len(suffix)]
                break
        return [(stem, input_path)]
    if not input_path.is_dir():
        raise DataIOError(f"input not found: {input_path}")
    root = input_path / dataset.ITEMS_SUBDIR if (input_path / dataset.MANIFEST_NAME).exists() else input_path
    out = []
    for p in sorted(root.glob("*.png")):
        name = p.name
        if name.endswith(pairio.GT_SUFFIX) or "_pred" in name or "_naive" in name:
            continue
        stem = name[: -len(pairio.IMG_SUFFIX)] if name.endswith(pairio.IMG_SUFFIX) else p.stem
        out.append((stem, p))
    if not out:
        raise DataIOError(f"no input images under {input_path}")
    return out


def _load_valid_mask(img_path: Path, stem: str):
    meta_path = img_path.parent / f"{stem}{pairio.META_SUFFIX}"
    if meta_path.exists():
        with open(meta_path, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
        if "valid_rle" in meta and "shape" in meta:
            return pairio.rle_decode_mask(meta["valid_rle"], tuple(meta["shape"]))
    return None


def cmd_reconstruct(args) -> int:
    cmap = optics.load_colormap(args.colormap)
    cfg = reconstruct.ReconstructConfig(
        k=args.k,
        smoothness_weight=args.smoothness,
        max_iters=args.max_iters,
        multiscale_levels=args.levels,
    )
    inputs = _collect_inputs(Path(args.input))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.sequence:
        frames = [pairio.load_image_png(p) for _, p in inputs]
        t0 = time.perf_counter()
        series = reconstruct.mean_thickness_series(frames, cmap, cfg)
        per_frame = (time.perf_counter() - t0) / len(frames)
        _write_csv(
            out / "series.csv",
            "index,frame,mean_nm,seconds_per_frame",
            [(i, inputs[i][0], f"{m:.6g}", f"{per_frame:.6g}") for i, m in series],
        )
        fig, ax = plt.subplots(figsize=(6, 3.2))
        ax.plot([i for i, _ in series], [m for _, m in series], marker="o")
        ax.set_xlabel("frame")
        ax.set_ylabel("mean thickness (nm)")
        fig.tight_layout()
        fig.savefig(out / "series.svg")
        plt.close(fig)
        print(f"sequence: {len(series)} frames, {per_frame * 1000:.1f} ms/frame -> {out / 'series.csv'}")
        return EXIT_OK

    rows = []
    for stem, path in inputs:
        img = pairio.load_image_png(path)
        valid = _load_valid_mask(path, stem)
        summary = {"id": stem, "mode": args.mode}
        if args.mode in ("regularized", "both"):
            res = reconstruct.reconstruct_regularized(img, cmap, cfg, valid=valid)
            pairio.save_field_png(res.field.values, out / f"{stem}_pred.png")
            summary.update(
                energy=res.energy,
                sweeps=res.sweeps,
                converged=res.converged,
                seconds=res.seconds,
                mean_nm=float(res.field.values[res.field.valid].mean()),
            )
        if args.mode in ("naive", "both"):
            t0 = time.perf_counter()
            naive = reconstruct.reconstruct_naive(img, cmap, valid=valid)
            name = f"{stem}_naive.png" if args.mode == "both" else f"{stem}_pred.png"
            pairio.save_field_png(naive.values, out / name)
            summary.setdefault("seconds", time.perf_counter() - t0)
            summary["naive_mean_nm"] = float(naive.values[naive.valid].mean())
        if args.compare:
            gt_dir = Path(args.compare)
            gt_root = gt_dir / dataset.ITEMS_SUBDIR if (gt_dir / dataset.MANIFEST_NAME).exists() else gt_dir
            gt_path = gt_root / f"{stem}{pairio.GT_SUFFIX}"
            if not gt_path.exists():
                raise DataIOError(f"no ground truth for {stem} under {gt_dir}")
            gt = pairio.load_field_png(gt_path)
            gt_mask = _load_valid_mask(gt_root / f"{stem}{pairio.IMG_SUFFIX}", stem)
            mask = gt_mask if valid is None else (valid & gt_mask if gt_mask is not None else valid)
            pred = pairio.load_field_png(out / f"{stem}_pred.png")
            pred = metrics.clamp_prediction(pred, args.clamp_lo_um, args.clamp_hi_um)
            report = metrics.evaluate(pred, gt, mask,
                                      clamp_lo_um=args.clamp_lo_um, clamp_hi_um=args.clamp_hi_um)
            summary["metrics"] = report.to_dict()
        with open(out / f"{stem}_summary.json", "w", encoding="utf-8") as fh:
            json.dump(summary, fh, sort_keys=True, indent=1)
        rows.append(summary)
        if "seconds" in summary:
            print(f"{stem}: {summary.get('mean_nm', summary.get('naive_mean_nm', float('nan'))):.1f} nm mean, "
                  f"{summary['seconds'] * 1000:.1f} ms", flush=True)
    print(f"reconstructed {len(rows)} image(s) -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate


def _gt_root(gt_dir: Path) -> Path:
    return gt_dir / dataset.ITEMS_SUBDIR if (gt_dir / dataset.MANIFEST_NAME).exists() else gt_dir


def _pred_ids(pred_dir: Path) -> dict[str, Path]:
    out = {}
    for p in sorted(pred_dir.glob("*.png")):
        name = p.name
        if name.endswith("_pred.png"):
            out[name[: -len("_pred.png")]] = p
    if not out:
        raise DataIOError(f"no *_pred.png files in {pred_dir}")
    return out


def _evaluate_dir(pred_dir: Path, gt_dir: Path, args):
    gt_root = _gt_root(gt_dir)
    preds = _pred_ids(pred_dir)
    acc = metrics.MetricsAccumulator(clamp_lo_um=args.clamp_lo_um, clamp_hi_um=args.clamp_hi_um)
    per_item = []
    for stem, pred_path in preds.items():
        gt_path = gt_root / f"{stem}{pairio.GT_SUFFIX}"
        if not gt_path.exists():
            raise DataIOError(f"unpaired prediction {pred_path.name}: no {gt_path.name} in {gt_root}")
        pred = metrics.clamp_prediction(pairio.load_field_png(pred_path),
                                        args.clamp_lo_um, args.clamp_hi_um)
        gt = pairio.load_field_png(gt_path)
        mask = _load_valid_mask(gt_root / f"{stem}{pairio.IMG_SUFFIX}", stem)
        report = metrics.evaluate(pred, gt, mask,
                                  clamp_lo_um=args.clamp_lo_um, clamp_hi_um=args.clamp_hi_um)
        acc.update(pred, gt, mask)
        per_item.append((stem, report))
    return acc.report(), per_item


def cmd_evaluate(args) -> int:
    gt_dir = Path(args.gt)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = {}
    for pred in args.pred:
        pred_dir = Path(pred)
        aggregate, per_item = _evaluate_dir(pred_dir, gt_dir, args)
        results[str(pred_dir)] = aggregate
        tag = pred_dir.name or "pred"
        _write_csv(
            out / f"per_item_{tag}.csv",
            "id," + metrics.csv_header(),
            [(stem, metrics.csv_row(rep)) for stem, rep in per_item],
        )
        agg = aggregate.to_dict()
        if args.silog_style == "scaled":
            agg["silog_scaled"] = 100.0 * float(np.sqrt(max(agg["silog"], 0.0)))
        with open(out / f"aggregate_{tag}.json", "w", encoding="utf-8") as fh:
            json.dump(agg, fh, sort_keys=True, indent=1)
        shown = agg["silog_scaled"] if args.silog_style == "scaled" else agg["silog"]
        print(f"{pred_dir}: rmse={aggregate.rmse:.2f} nm  mae={aggregate.mae:.2f} nm  "
              f"silog={shown:.6g}  n={aggregate.n_valid}")
    if len(args.pred) > 1:
        best = min(results, key=lambda k: results[k].rmse)
        with open(out / "selection.json", "w", encoding="utf-8") as fh:
            json.dump({"best": best, "by": "rmse",
                       "rmse_nm": {k: v.rmse for k, v in results.items()}}, fh,
                      sort_keys=True, indent=1)
        print(f"best by RMSE: {best}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep


def _sweep_spec(size: int, mix: float, seed: int, experimental: str | None,
                augment: AugmentConfig, field_size: int) -> dataset.DatasetSpec:
    if experimental:
        return dataset.DatasetSpec(
            total_count=size,
            frac_perlin=(1.0 - mix) / 2.0,
            frac_gaussian=1.0 - mix - (1.0 - mix) / 2.0,
            frac_experimental=mix,
            master_seed=seed,
            field_size=field_size,
            experimental_source=experimental,
            augment=augment,
            enforce_mix_policy=False,
        )
    return dataset.DatasetSpec(
        total_count=size,
        frac_perlin=mix,
        frac_gaussian=1.0 - mix,
        frac_experimental=0.0,
        master_seed=seed,
        field_size=field_size,
        augment=augment,
        enforce_mix_policy=False,
    )


def cmd_sweep(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    mixes = [float(m) for m in args.mixes.split(",")]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    noise_aug = AugmentConfig(gaussian_noise=True, p_gaussian_noise=1.0)
    rows = []
    for si, size in enumerate(sizes):
        for mi, mix in enumerate(mixes):
            tag = f"n{size}_mix{mix:g}"
            cell_seed = int(np.uint64(args.seed) + 1000 * si + mi)
            train_dir = out / tag / "train"
            test_dir = out / tag / "test"
            train_spec = _sweep_spec(size, mix, cell_seed, args.experimental,
                                     AugmentConfig(), args.field_size)
            test_spec = _sweep_spec(args.test_count, mix, cell_seed + 7, args.experimental,
                                    noise_aug, args.field_size)
            dataset.generate(train_spec, train_dir, threads=_threads(args))
            dataset.generate(test_spec, test_dir, threads=_threads(args))

            cmap = optics.default_colormap()
            cfg = reconstruct.ReconstructConfig()
            acc = metrics.MetricsAccumulator()
            t0 = time.perf_counter()
            n_frames = 0
            for img, fld, mask in dataset.load(test_dir):
                res = reconstruct.reconstruct_regularized(img, cmap, cfg, valid=mask)
                pred = metrics.clamp_prediction(res.field.values)
                acc.update(pred, fld.values, mask)
                n_frames += 1
            classical = acc.report()
            per_frame = (time.perf_counter() - t0) / max(n_frames, 1)

            trainer_rmse = ""
            if args.trainer_cmd:
                trainer_rmse = _run_trainer_cell(args, out / tag, train_dir, test_dir)
            rows.append((size, f"{mix:g}", n_frames, f"{classical.rmse:.4f}",
                         f"{per_frame:.4f}", trainer_rmse))
            print(f"sweep {tag}: classical rmse {classical.rmse:.1f} nm "
                  f"({per_frame * 1000:.0f} ms/frame)"
                  + (f", trainer rmse {trainer_rmse} nm" if trainer_rmse else ""))
    _write_csv(out / "grid.csv",
               "size,mix,n_test,classical_rmse_nm,classical_seconds_per_frame,trainer_rmse_nm",
               rows)
    print(f"sweep grid -> {out / 'grid.csv'}")
    return EXIT_OK


def _run_trainer_cell(args, cell_dir: Path, train_dir: Path, test_dir: Path) -> str:
    import subprocess

    pred_dir = cell_dir / "trainer_pred"
    trainer_out = cell_dir / "trainer_out"
    cfg_path = cell_dir / "trainer_config.json"
    cfg = dict(json.loads(args.trainer_config) if args.trainer_config else {})
    cfg.setdefault("epochs", 2)
    cfg.setdefault("model_size", "tiny")
    cfg["predict"] = {"images": str(test_dir / dataset.ITEMS_SUBDIR), "out": str(pred_dir)}
    with open(cfg_path, "w", encoding="utf-8") as fh:
        json.dump(cfg, fh, sort_keys=True, indent=1)
    cmd = args.trainer_cmd.split() + [
        "--dataset", str(train_dir), "--config", str(cfg_path), "--out", str(trainer_out),
    ]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise NumericalError(f"trainer subprocess failed ({proc.returncode}): {proc.stderr[-500:]}")
    acc = metrics.MetricsAccumulator()
    gt_root = test_dir / dataset.ITEMS_SUBDIR
    for stem, pred_path in _pred_ids(pred_dir).items():
        pred = metrics.clamp_prediction(pairio.load_field_png(pred_path))
        gt = pairio.load_field_png(gt_root / f"{stem}{pairio.GT_SUFFIX}")
        mask = _load_valid_mask(gt_root / f"{stem}{pairio.IMG_SUFFIX}", stem)
        acc.update(pred, gt, mask)
    return f"{acc.report().rmse:.4f}"


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="filmetric", description=__doc__)
    parser.add_argument("--version", action="version", version=f"filmetric {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("colormap", help="build and serialize a thickness->RGB colormap")
    p.add_argument("--stack", help="film stack config (JSON or key=value)")
    p.add_argument("--illuminant")
    p.add_argument("--filter")
    p.add_argument("--sensitivity-r")
    p.add_argument("--sensitivity-g")
    p.add_argument("--sensitivity-b")
    p.add_argument("--grid-min", type=float, default=0.0)
    p.add_argument("--grid-max", type=float, default=5000.0)
    p.add_argument("--grid-step", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.add_argument("--preview", help="preview strip PNG (default: alongside --out)")
    p.add_argument("--csv", help="also export CSV")
    p.set_defaults(func=cmd_colormap)

    p = sub.add_parser("synth", help="generate a dataset from a spec file")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("reconstruct", help="invert interferogram(s) to thickness")
    p.add_argument("--input", required=True, help="image file or directory")
    p.add_argument("--colormap", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("naive", "regularized", "both"), default="regularized")
    p.add_argument("--k", type=int, default=reconstruct.ReconstructConfig().k)
    p.add_argument("--smoothness", type=float, default=reconstruct.ReconstructConfig().smoothness_weight)
    p.add_argument("--max-iters", type=int, default=reconstruct.ReconstructConfig().max_iters)
    p.add_argument("--levels", type=int, default=reconstruct.ReconstructConfig().multiscale_levels)
    p.add_argument("--sequence", action="store_true", help="treat directory as ordered frames")
    p.add_argument("--compare", help="ground-truth directory for per-frame metrics")
    p.add_argument("--clamp-lo-um", type=float, default=0.0)
    p.add_argument("--clamp-hi-um", type=float, default=5.0)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("evaluate", help="score prediction dir(s) against ground truth")
    p.add_argument("--pred", action="append", required=True, help="repeatable")
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--clamp-lo-um", type=float, default=0.0)
    p.add_argument("--clamp-hi-um", type=float, default=5.0)
    p.add_argument("--silog-style", choices=("raw", "scaled"), default="raw")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="dataset size x mix grid with classical baseline")
    p.add_argument("--sizes", required=True, help="comma-separated item counts")
    p.add_argument("--mixes", required=True, help="comma-separated mix fractions")
    p.add_argument("--out", required=True)
    p.add_argument("--test-count", type=int, default=6)
    p.add_argument("--field-size", type=int, default=128,
                   help="profile size; 128 matches the toy trainer input")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--experimental", help="experimental pair directory (mix = experimental fraction)")
    p.add_argument("--trainer-cmd", help="subprocess prefix implementing the trainer contract")
    p.add_argument("--trainer-config", help="JSON string merged into the trainer config")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataIOError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

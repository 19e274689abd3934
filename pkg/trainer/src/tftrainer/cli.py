"""Subprocess entry point: `trainer --dataset <dir> --config <json> --out <dir>`.

The config JSON carries TrainConfig fields plus optional keys:
  "eval_dataset": directory scored for best-checkpoint selection (otherwise a
                  held-out split of the training set is used)
  "predict": {"images": dir, "out": dir} to export predictions after training
Exit code 0 on success.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import TrainConfig
from .predict import export_predictions
from .train import load_checkpoint, train


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="trainer", description=__doc__)
    parser.add_argument("--dataset", required=True, help="filmetric dataset directory")
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--out", required=True, help="output directory")
    args = parser.parse_args(argv)

    try:
        raw = json.loads(Path(args.config).read_text())
        cfg = TrainConfig.from_dict(raw)
        ckpt_path, _history = train(
            args.dataset, cfg, args.out, eval_dataset_dir=raw.get("eval_dataset")
        )
        summary = {"checkpoint": str(ckpt_path), "config": cfg.to_dict()}
        if "predict" in raw:
            model, cfg_loaded, blob = load_checkpoint(ckpt_path)
            ids = export_predictions(
                model, raw["predict"]["images"], raw["predict"]["out"],
                cfg_loaded.clamp_lo_um, cfg_loaded.clamp_hi_um,
            )
            summary["predicted"] = len(ids)
            summary["best_rmse"] = blob["best_rmse"]
        with open(Path(args.out) / "summary.json", "w", encoding="utf-8") as fh:
            json.dump(summary, fh, sort_keys=True, indent=1)
    except (ValueError, FloatingPointError) as exc:
        print(f"trainer error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"trainer io error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())

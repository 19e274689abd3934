#!/usr/bin/env python3
"""Emit golden metric vectors for cross-implementation parity checks.

Writes a JSON list of (pred, gt, mask, expected-report) cases computed by the
metrics module; other implementations (e.g. the trainer's in-loop metrics)
must reproduce the expected values within 1e-9.

Usage: python scripts/make_golden_metrics.py --out golden_metrics.json
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from filmetric import metrics


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="golden_metrics.json")
    ap.add_argument("--cases", type=int, default=12)
    args = ap.parse_args()

    rng = np.random.default_rng(20240817)
    cases = []
    for i in range(args.cases):
        shape = (int(rng.integers(3, 9)), int(rng.integers(3, 9)))
        gt = rng.uniform(10.0, 4500.0, shape)
        if i % 3 == 0:
            gt[0, 0] = 0.0  # exercise zero-ground-truth handling
        pred = np.abs(gt + rng.normal(0.0, 200.0, shape))
        if i % 4 == 0:
            pred[0, -1] = 0.0  # exercise the log floor
        mask = rng.random(shape) < 0.9
        mask[1, 1] = True
        rep = metrics.evaluate(pred, gt, mask)
        cases.append(
            {
                "pred_nm": pred.tolist(),
                "gt_nm": gt.tolist(),
                "mask": mask.astype(int).tolist(),
                "expected": {
                    k: getattr(rep, k)
                    for k in ("silog", "abs_rel", "log10", "rms", "sq_rel",
                              "log_rms", "mae", "mse", "rmse")
                },
                "n_valid": rep.n_valid,
            }
        )
    payload = {"silog_lambda": metrics.DEFAULT_SILOG_LAMBDA,
               "log_floor_nm": metrics.LOG_FLOOR_NM,
               "cases": cases}
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
    print(f"wrote {len(cases)} golden cases -> {args.out}")


if __name__ == "__main__":
    main()

"""In-loop evaluation metrics.

Independent implementation of the shared metric definitions; parity with the
toolkit is pinned by golden vectors (tests/golden_metrics.json) at 1e-9.
"""

from __future__ import annotations

import numpy as np

LOG_FLOOR_NM = 1.0
SILOG_LAMBDA = 0.85


def clamp_prediction(pred_nm: np.ndarray, lo_um: float = 0.0, hi_um: float = 5.0) -> np.ndarray:
    if lo_um >= hi_um:
        raise ValueError("clamp bounds must be ordered")
    return np.clip(np.asarray(pred_nm, dtype=np.float64), lo_um * 1000.0, hi_um * 1000.0)


def evaluate(pred_nm, gt_nm, mask=None, lam: float = SILOG_LAMBDA) -> dict:
    pred = np.asarray(pred_nm, dtype=np.float64)
    gt = np.asarray(gt_nm, dtype=np.float64)
    if mask is None:
        mask = np.ones(gt.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("empty validity mask")
    p = pred[mask]
    g = gt[mask]
    if (g < 0).any():
        raise ValueError("negative ground truth")

    err = p - g
    mse = float(np.mean(err * err))
    out = {
        "mae": float(np.mean(np.abs(err))),
        "mse": mse,
        "rmse": float(np.sqrt(mse)),
        "n_valid": int(p.size),
    }
    out["rms"] = out["rmse"]

    rel = g > 0
    if not rel.any():
        raise ValueError("no valid pixels with positive ground truth")
    pr = np.maximum(p[rel], LOG_FLOOR_NM)
    gr = g[rel]
    d = np.log(pr) - np.log(gr)
    out["silog"] = float(np.mean(d * d) - lam * np.mean(d) ** 2)
    out["log_rms"] = float(np.sqrt(np.mean(d * d)))
    out["abs_rel"] = float(np.mean(np.abs(p[rel] - gr) / gr))
    out["sq_rel"] = float(np.mean((p[rel] - gr) ** 2 / gr))
    out["log10"] = float(np.mean(np.abs(np.log10(pr) - np.log10(gr))))
    return out

"""Depth-style error metrics over thickness predictions, masked and clamped.

All metrics work in nanometers. Relative and log metrics skip pixels whose
ground truth is zero (division safety); absolute metrics keep them. A 1 nm
floor is applied to predictions inside log-domain metrics only. Reductions
use numpy's pairwise summation, so reports are bit-stable for a given input.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

LOG_FLOOR_NM = 1.0
DEFAULT_SILOG_LAMBDA = 0.85


def clamp_prediction(pred_nm: np.ndarray, lo_um: float = 0.0, hi_um: float = 5.0) -> np.ndarray:
    """Pointwise clamp of a prediction to [lo, hi] micrometers (applied before scoring)."""
    if lo_um >= hi_um:
        raise ConfigError("clamp lower bound must be below upper bound")
    return np.clip(np.asarray(pred_nm, dtype=np.float64), lo_um * 1000.0, hi_um * 1000.0)


@dataclass(frozen=True)
class MetricsReport:
    silog: float
    abs_rel: float
    log10: float
    rms: float
    sq_rel: float
    log_rms: float
    mae: float
    mse: float
    rmse: float
    n_valid: int
    clamp_lo_um: float = 0.0
    clamp_hi_um: float = 5.0

    def to_dict(self) -> dict:
        d = {
            "silog": self.silog,
            "abs_rel": self.abs_rel,
            "log10": self.log10,
            "rms": self.rms,
            "sq_rel": self.sq_rel,
            "log_rms": self.log_rms,
            "mae": self.mae,
            "mse": self.mse,
            "rmse": self.rmse,
            "n_valid": self.n_valid,
            "clamp_lo_um": self.clamp_lo_um,
            "clamp_hi_um": self.clamp_hi_um,
            "mae_um": self.mae / 1000.0,
            "rmse_um": self.rmse / 1000.0,
            "rms_um": self.rms / 1000.0,
        }
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


CSV_FIELDS = ("silog", "abs_rel", "log10", "rms", "sq_rel", "log_rms", "mae", "mse", "rmse", "n_valid")


def csv_header(prefix: str = "") -> str:
    return ",".join(prefix + f for f in CSV_FIELDS)


def csv_row(report: MetricsReport) -> str:
    d = report.to_dict()
    return ",".join(f"{d[f]:.9g}" if f != "n_valid" else str(d[f]) for f in CSV_FIELDS)


def silog_error(log_diff: np.ndarray, lam: float = DEFAULT_SILOG_LAMBDA) -> float:
    """Scale-invariant log error mean(d^2) - lam * mean(d)^2 on log differences d."""
    d2 = float(np.mean(log_diff * log_diff))
    return d2 - lam * float(np.mean(log_diff)) ** 2


class MetricsAccumulator:
    """Pixel-weighted pooling across items; equals metrics over the concatenation."""

    def __init__(self, lam_si: float = DEFAULT_SILOG_LAMBDA,
                 clamp_lo_um: float = 0.0, clamp_hi_um: float = 5.0):
        self.lam_si = lam_si
        self.clamp_lo_um = clamp_lo_um
        self.clamp_hi_um = clamp_hi_um
        self.n_abs = 0
        self.n_rel = 0
        self.sum_d = 0.0
        self.sum_d2 = 0.0
        self.sum_abs_rel = 0.0
        self.sum_log10 = 0.0
        self.sum_sq_rel = 0.0
        self.sum_abs = 0.0
        self.sum_sq = 0.0

    def update(self, pred_nm: np.ndarray, gt_nm: np.ndarray, mask: np.ndarray | None = None):
        pred = np.asarray(pred_nm, dtype=np.float64)
        gt = np.asarray(gt_nm, dtype=np.float64)
        if pred.shape != gt.shape:
            raise ConfigError("prediction and ground truth shapes differ")
        if mask is None:
            mask = np.ones(gt.shape, dtype=bool)
        else:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != gt.shape:
                raise ConfigError("mask shape differs from data")
        if not mask.any():
            raise ConfigError("empty validity mask")
        if np.any(gt[mask] < 0):
            raise ConfigError("negative ground truth on a valid pixel")

        p = pred[mask]
        g = gt[mask]
        err = p - g
        self.n_abs += int(p.size)
        self.sum_abs += float(np.sum(np.abs(err)))
        self.sum_sq += float(np.sum(err * err))

        rel = g > 0
        if rel.any():
            pr = p[rel]
            gr = g[rel]
            d = np.log(np.maximum(pr, LOG_FLOOR_NM)) - np.log(gr)
            self.n_rel += int(gr.size)
            self.sum_d += float(np.sum(d))
            self.sum_d2 += float(np.sum(d * d))
            self.sum_abs_rel += float(np.sum(np.abs(pr - gr) / gr))
            self.sum_log10 += float(
                np.sum(np.abs(np.log10(np.maximum(pr, LOG_FLOOR_NM)) - np.log10(gr)))
            )
            self.sum_sq_rel += float(np.sum((pr - gr) ** 2 / gr))

    def report(self) -> MetricsReport:
        if self.n_abs == 0:
            raise ConfigError("no pixels accumulated")
        if self.n_rel == 0:
            raise ConfigError("no valid pixels with positive ground truth")
        mean_d = self.sum_d / self.n_rel
        mean_d2 = self.sum_d2 / self.n_rel
        mse = self.sum_sq / self.n_abs
        rmse = float(np.sqrt(mse))
        return MetricsReport(
            silog=mean_d2 - self.lam_si * mean_d**2,
            abs_rel=self.sum_abs_rel / self.n_rel,
            log10=self.sum_log10 / self.n_rel,
            rms=rmse,
            sq_rel=self.sum_sq_rel / self.n_rel,
            log_rms=float(np.sqrt(mean_d2)),
            mae=self.sum_abs / self.n_abs,
            mse=mse,
            rmse=rmse,
            n_valid=self.n_abs,
            clamp_lo_um=self.clamp_lo_um,
            clamp_hi_um=self.clamp_hi_um,
        )


def evaluate(
    pred_nm: np.ndarray,
    gt_nm: np.ndarray,
    mask: np.ndarray | None = None,
    lam_si: float = DEFAULT_SILOG_LAMBDA,
    clamp_lo_um: float = 0.0,
    clamp_hi_um: float = 5.0,
) -> MetricsReport:
    """Score one prediction against ground truth over the validity mask."""
    acc = MetricsAccumulator(lam_si=lam_si, clamp_lo_um=clamp_lo_um, clamp_hi_um=clamp_hi_um)
    acc.update(pred_nm, gt_nm, mask)
    return acc.report()

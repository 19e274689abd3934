"""Scale-invariant log loss over validity masks."""

from __future__ import annotations

import torch

LOG_FLOOR_NM = 1.0


def silog_loss(pred_nm: torch.Tensor, gt_nm: torch.Tensor, valid: torch.Tensor,
               lam: float = 0.85) -> torch.Tensor:
    """mean(d^2) - lam * mean(d)^2 with d = ln(pred) - ln(gt) over valid, gt>0 pixels.

    Predictions are floored at 1 nm inside the logs; the floor never binds for
    this model (outputs are exp(...)>0) but keeps the loss usable on raw maps.
    """
    mask = valid & (gt_nm > 0)
    n = mask.sum()
    if n.item() == 0:
        raise ValueError("no valid pixels with positive ground truth")
    d = torch.log(torch.clamp(pred_nm, min=LOG_FLOOR_NM)) - torch.log(gt_nm)
    d = d[mask]
    return (d * d).mean() - lam * d.mean() ** 2

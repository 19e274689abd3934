"""Training loop: Adam on the SILog loss with periodic held-out evaluation.

Best checkpoint selection is by held-out RMSE (predictions clamped before
scoring). Logs append to train_log.jsonl; everything is seeded and the loader
is single-process, so repeat runs match.
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np
import torch

from . import __version__
from .config import TrainConfig
from .data import ArrayDataset, load_pairs, train_eval_split
from .losses import silog_loss
from .metrics import clamp_prediction, evaluate
from .model import build_model


def _to_tensor_batch(imgs, gts, valids, device):
    x = torch.from_numpy(np.ascontiguousarray(imgs)).float().permute(0, 3, 1, 2) / 255.0
    y = torch.from_numpy(np.ascontiguousarray(gts)).double()
    m = torch.from_numpy(np.ascontiguousarray(valids))
    return x.to(device), y.to(device), m.to(device)


def evaluate_model(model, dataset: ArrayDataset, cfg: TrainConfig, device="cpu") -> dict:
    model.eval()
    preds, gts, valids = [], [], []
    with torch.no_grad():
        for imgs, gt, valid in dataset.batches(cfg.batch_size):
            x, _, _ = _to_tensor_batch(imgs, gt, valid, device)
            preds.append(model(x).cpu().numpy())
            gts.append(gt)
            valids.append(valid)
    pred = clamp_prediction(np.concatenate(preds), cfg.clamp_lo_um, cfg.clamp_hi_um)
    report = evaluate(pred, np.concatenate(gts), np.concatenate(valids), lam=cfg.silog_lambda)
    model.train()
    return report


def save_checkpoint(path, model, cfg: TrainConfig, step: int, best_rmse: float):
    torch.save(
        {
            "state_dict": model.state_dict(),
            "config": cfg.to_dict(),
            "step": step,
            "best_rmse": best_rmse,
            "version": __version__,
        },
        path,
    )


def load_checkpoint(path, device="cpu"):
    blob = torch.load(path, map_location=device, weights_only=False)
    cfg = TrainConfig.from_dict(blob["config"])
    model = build_model(cfg)
    model.load_state_dict(blob["state_dict"])
    model.eval()
    return model, cfg, blob


def train(dataset_dir, cfg: TrainConfig, out_dir, eval_dataset_dir=None, device="cpu"):
    """Train on a filmetric dataset directory; returns (checkpoint path, history)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)

    pairs = load_pairs(dataset_dir)
    if eval_dataset_dir is not None:
        train_pairs = pairs
        eval_pairs = load_pairs(eval_dataset_dir)
    else:
        train_pairs, eval_pairs = train_eval_split(pairs, cfg.eval_fraction, cfg.seed)
    train_set = ArrayDataset(train_pairs, cfg.img_size)
    eval_set = ArrayDataset(eval_pairs, cfg.img_size)

    model = build_model(cfg).to(device)
    model.train()
    optimizer = torch.optim.Adam(
        model.parameters(),
        lr=cfg.lr,
        weight_decay=cfg.weight_decay,
        eps=cfg.adam_epsilon,
    )

    log_path = out_dir / "train_log.jsonl"
    ckpt_path = out_dir / "checkpoint.pt"
    best_rmse = float("inf")
    step = 0
    history = []
    t0 = time.time()

    def log(record):
        record["elapsed_s"] = round(time.time() - t0, 3)
        history.append(record)
        with open(log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    def run_eval():
        nonlocal best_rmse
        report = evaluate_model(model, eval_set, cfg, device)
        improved = report["rmse"] < best_rmse
        if improved:
            best_rmse = report["rmse"]
            save_checkpoint(ckpt_path, model, cfg, step, best_rmse)
        log({"event": "eval", "step": step, "improved": improved,
             "best_rmse": best_rmse, **{f"eval_{k}": v for k, v in report.items()}})

    log({"event": "start", "model_size": cfg.model_size,
         "n_train": len(train_set), "n_eval": len(eval_set),
         "params": int(sum(p.numel() for p in model.parameters()))})

    for epoch in range(cfg.epochs):
        for imgs, gts, valids in train_set.batches(cfg.batch_size, rng=rng,
                                                   rotations=cfg.rotations):
            x, y, m = _to_tensor_batch(imgs, gts, valids, device)
            optimizer.zero_grad()
            pred = model(x).double()
            loss = silog_loss(pred, y, m, lam=cfg.silog_lambda)
            if not torch.isfinite(loss):
                raise FloatingPointError(
                    f"non-finite SILog loss at step {step} "
                    f"(pred range [{float(pred.min())}, {float(pred.max())}])"
                )
            loss.backward()
            optimizer.step()
            step += 1
            if step % cfg.log_every_steps == 0:
                log({"event": "train", "step": step, "epoch": epoch,
                     "silog": float(loss.item())})
            if step % cfg.eval_every_steps == 0:
                run_eval()

    run_eval()  # final evaluation also competes for best-by-RMSE
    log({"event": "done", "step": step, "best_rmse": best_rmse})
    return ckpt_path, history

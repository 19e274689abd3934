#!/usr/bin/env python3
"""Per-frame inversion latency on synthetic frames (clean and noisy).

Usage: python scripts/benchmark_latency.py [--frames 10] [--size 256]
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from filmetric import optics, reconstruct as rc, synth
from filmetric.fieldgen import PerlinParams, ThicknessField, gen_perlin


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--frames", type=int, default=10)
    ap.add_argument("--size", type=int, default=256)
    args = ap.parse_args()

    cmap = optics.default_colormap()
    cfg = rc.ReconstructConfig()
    rng = np.random.default_rng(0)

    frames = []
    for i in range(args.frames):
        unit = gen_perlin(PerlinParams(octaves=1, scale_px=1.2 * args.size, seed=i),
                          args.size, args.size)
        field = ThicknessField(values=900.0 + 400.0 * unit.values)
        img = synth.render(field, cmap)
        px = np.clip(img.pixels.astype(np.float64) + rng.normal(0, 10, img.pixels.shape), 0, 255)
        frames.append((img, synth.Interferogram(pixels=np.rint(px).astype(np.uint8))))

    # warm the JIT before timing
    rc.reconstruct_regularized(frames[0][0], cmap, cfg)

    for label, idx in (("clean", 0), ("noisy", 1)):
        times = []
        for pair in frames:
            t0 = time.perf_counter()
            rc.reconstruct_regularized(pair[idx], cmap, cfg)
            times.append(time.perf_counter() - t0)
        times = np.array(times) * 1000.0
        print(f"{label}: mean {times.mean():.1f} ms/frame "
              f"(min {times.min():.1f}, max {times.max():.1f}, n={args.frames}, "
              f"{args.size}x{args.size})")


if __name__ == "__main__":
    main()

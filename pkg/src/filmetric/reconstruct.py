"""Classical inversion: per-pixel colormap matching plus smoothness labeling.

The colormap is many-to-one, so each pixel gets a small candidate set (local
minima of color distance along the thickness grid). The naive solver keeps
the global minimum; the regularized solver picks one candidate per pixel by
minimizing data + pairwise |Δh| energy with coarse-to-fine iterated
conditional modes (deterministic raster sweeps, energy never increases).
Masked pixels carry no data cost and are in-painted by the smoothness term
(their update is the lower median of their neighbors).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from numba import config as _numba_config
from numba import njit, prange
from scipy import ndimage

# The default TBB probe warns on older system TBBs; the workqueue layer is
# deterministic and sufficient for our row-parallel kernels.
_numba_config.THREADING_LAYER = "workqueue"

from .errors import ConfigError, NumericalError
from .fieldgen import ThicknessField
from .optics import Colormap
from .synth import Interferogram

_COLOR_METRIC = "squared_euclidean_rgb"


@dataclass(frozen=True)
class ReconstructConfig:
    # k=16 keeps the true branch in the candidate set for ~95% of pixels at
    # 8-bit noise std 10; 8 loses ~20% of them and caps accuracy well short
    # of the round-trip bars.
    k: int = 16
    smoothness_weight: float = 4e-4
    max_iters: int = 40
    multiscale_levels: int = 4
    color_metric: str = _COLOR_METRIC

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("candidate count k must be >= 1")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if self.smoothness_weight < 0:
            raise ConfigError("smoothness_weight must be >= 0")
        if self.multiscale_levels < 1:
            raise ConfigError("multiscale_levels must be >= 1")
        if self.color_metric != _COLOR_METRIC:
            raise ConfigError(f"unsupported color metric {self.color_metric!r}")


@dataclass(frozen=True)
class CandidateSet:
    """Per-pixel thickness candidates sorted by ascending color distance."""

    thickness_nm: np.ndarray  # (H, W, K), padded entries repeat the last candidate
    distance: np.ndarray      # (H, W, K), padded entries are +inf
    count: np.ndarray         # (H, W) int32, >= 1

    def at(self, y: int, x: int) -> list[tuple[float, float]]:
        n = int(self.count[y, x])
        return [
            (float(self.thickness_nm[y, x, i]), float(self.distance[y, x, i]))
            for i in range(n)
        ]


@njit(cache=True, parallel=True)
def _topk_local_minima(colors, lut, grid, k, out_h, out_d, out_n):
    """Per color: local minima of squared RGB distance along the grid, k lowest kept.

    The whole LUT fits in cache, so distances are evaluated on the fly in a
    single traversal instead of materializing a (colors, grid) matrix. Strict
    descent on the left, non-strict on the right, so a flat plateau
    contributes its first (lowest-thickness) point only; grid boundaries count
    when they are minima. Ties in distance keep the lower thickness first.
    Rows are independent, so the parallel schedule cannot change the result.
    """
    n_rows = colors.shape[0]
    n_grid = grid.shape[0]
    for c in prange(n_rows):
        r = colors[c, 0]
        g = colors[c, 1]
        b = colors[c, 2]
        n = 0
        d_left = np.inf
        dr = lut[0, 0] - r
        dg = lut[0, 1] - g
        db = lut[0, 2] - b
        di = dr * dr + dg * dg + db * db
        for i in range(n_grid):
            if i + 1 < n_grid:
                dr = lut[i + 1, 0] - r
                dg = lut[i + 1, 1] - g
                db = lut[i + 1, 2] - b
                d_right = dr * dr + dg * dg + db * db
            else:
                d_right = np.inf
            if di < d_left and di <= d_right:
                if n < k:
                    j = n - 1
                    while j >= 0 and out_d[c, j] > di:
                        out_d[c, j + 1] = out_d[c, j]
                        out_h[c, j + 1] = out_h[c, j]
                        j -= 1
                    out_d[c, j + 1] = di
                    out_h[c, j + 1] = grid[i]
                    n += 1
                elif di < out_d[c, k - 1]:
                    j = k - 2
                    while j >= 0 and out_d[c, j] > di:
                        out_d[c, j + 1] = out_d[c, j]
                        out_h[c, j + 1] = out_h[c, j]
                        j -= 1
                    out_d[c, j + 1] = di
                    out_h[c, j + 1] = grid[i]
            d_left = di
            di = d_right
        out_n[c] = n
        for j in range(n, k):
            out_h[c, j] = out_h[c, 0]


def _candidates_for_colors(
    colors: np.ndarray, colormap: Colormap, k: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Local minima of squared RGB distance along the grid for each color row."""
    n_colors = colors.shape[0]
    out_h = np.zeros((n_colors, k), dtype=np.float64)
    out_d = np.full((n_colors, k), np.inf, dtype=np.float64)
    out_n = np.zeros(n_colors, dtype=np.int32)
    _topk_local_minima(
        np.ascontiguousarray(colors),
        colormap.rgb,
        colormap.thickness_grid_nm,
        k,
        out_h,
        out_d,
        out_n,
    )
    return out_h, out_d, out_n


def _candidate_grid(
    colors: np.ndarray, colormap: Colormap, k: int, quantized: bool = False
) -> CandidateSet:
    h, w = colors.shape[:2]
    flat = np.ascontiguousarray(colors.reshape(-1, 3))
    if not quantized:
        uh, ud, un = _candidates_for_colors(flat, colormap, k)
        return CandidateSet(
            thickness_nm=uh.reshape(h, w, k),
            distance=ud.reshape(h, w, k),
            count=un.reshape(h, w),
        )
    # 8-bit images repeat colors heavily; dedup before the grid scan.
    keys = (
        (np.round(flat[:, 0] * 255).astype(np.int64) << 16)
        | (np.round(flat[:, 1] * 255).astype(np.int64) << 8)
        | np.round(flat[:, 2] * 255).astype(np.int64)
    )
    uniq, inverse = np.unique(keys, return_inverse=True)
    ucolors = np.stack(
        [(uniq >> 16) & 255, (uniq >> 8) & 255, uniq & 255], axis=1
    ).astype(np.float64) / 255.0
    uh, ud, un = _candidates_for_colors(ucolors, colormap, k)
    return CandidateSet(
        thickness_nm=uh[inverse].reshape(h, w, k),
        distance=ud[inverse].reshape(h, w, k),
        count=un[inverse].reshape(h, w),
    )


def candidates(img: Interferogram, colormap: Colormap, k: int = 8) -> CandidateSet:
    """Candidate thicknesses per pixel: the K best local minima of color distance."""
    if k < 1:
        raise ConfigError("k must be >= 1")
    return _candidate_grid(img.pixels.astype(np.float64) / 255.0, colormap, k, quantized=True)


def reconstruct_naive(
    img: Interferogram,
    colormap: Colormap,
    valid: np.ndarray | None = None,
    precomputed: CandidateSet | None = None,
) -> ThicknessField:
    """Per-pixel global minimum; ambiguous and non-smooth under phase periodicity.

    Candidates are sorted by distance with lowest-thickness tie-break, so the
    first candidate is exactly the global minimum with the documented ties.
    """
    cs = precomputed if precomputed is not None else candidates(img, colormap, k=1)
    mask = np.ones(img.pixels.shape[:2], dtype=bool) if valid is None else valid
    return ThicknessField(values=cs.thickness_nm[..., 0].copy(), valid=mask)


# ---------------------------------------------------------------------------
# Iterated conditional modes over candidate labels


@njit(cache=True)
def _total_energy(cand_d, labels, thick, valid, weight):
    h, w = thick.shape
    energy = 0.0
    for y in range(h):
        for x in range(w):
            if valid[y, x]:
                energy += cand_d[y, x, labels[y, x]]
            if y + 1 < h:
                energy += weight * abs(thick[y, x] - thick[y + 1, x])
            if x + 1 < w:
                energy += weight * abs(thick[y, x] - thick[y, x + 1])
    return energy


@njit(cache=True)
def _icm_sweeps(cand_h, cand_d, n_cand, labels, thick, valid, weight, max_sweeps):
    """Raster-order coordinate descent; returns (sweeps, converged, energies)."""
    h, w = thick.shape
    energies = np.empty(max_sweeps, dtype=np.float64)
    nb = np.empty(4, dtype=np.float64)
    sweeps = 0
    converged = False
    for sweep in range(max_sweeps):
        changed = 0
        for y in range(h):
            for x in range(w):
                if valid[y, x]:
                    best_k = labels[y, x]
                    best_cost = np.inf
                    for k in range(n_cand[y, x]):
                        hk = cand_h[y, x, k]
                        cost = cand_d[y, x, k]
                        if y > 0:
                            cost += weight * abs(hk - thick[y - 1, x])
                        if y + 1 < h:
                            cost += weight * abs(hk - thick[y + 1, x])
                        if x > 0:
                            cost += weight * abs(hk - thick[y, x - 1])
                        if x + 1 < w:
                            cost += weight * abs(hk - thick[y, x + 1])
                        if cost < best_cost:
                            best_cost = cost
                            best_k = k
                    if best_k != labels[y, x]:
                        labels[y, x] = best_k
                        thick[y, x] = cand_h[y, x, best_k]
                        changed += 1
                else:
                    m = 0
                    if y > 0:
                        nb[m] = thick[y - 1, x]
                        m += 1
                    if y + 1 < h:
                        nb[m] = thick[y + 1, x]
                        m += 1
                    if x > 0:
                        nb[m] = thick[y, x - 1]
                        m += 1
                    if x + 1 < w:
                        nb[m] = thick[y, x + 1]
                        m += 1
                    # insertion sort of the <=4 neighbors, then lower median
                    for i in range(1, m):
                        key = nb[i]
                        j = i - 1
                        while j >= 0 and nb[j] > key:
                            nb[j + 1] = nb[j]
                            j -= 1
                        nb[j + 1] = key
                    med = nb[(m - 1) // 2]
                    if med != thick[y, x]:
                        thick[y, x] = med
                        changed += 1
        energies[sweep] = _total_energy(cand_d, labels, thick, valid, weight)
        sweeps = sweep + 1
        if changed == 0:
            converged = True
            break
    return sweeps, converged, energies[:sweeps]


@njit(cache=True)
def _nearest_labels(cand_h, n_cand, init_thick):
    h, w, _ = cand_h.shape
    labels = np.zeros((h, w), dtype=np.int32)
    thick = np.empty((h, w), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            best_k = 0
            best = abs(cand_h[y, x, 0] - init_thick[y, x])
            for k in range(1, n_cand[y, x]):
                dist = abs(cand_h[y, x, k] - init_thick[y, x])
                if dist < best:
                    best = dist
                    best_k = k
            labels[y, x] = best_k
            thick[y, x] = cand_h[y, x, best_k]
    return labels, thick


@dataclass(frozen=True)
class ReconstructResult:
    field: ThicknessField
    energy: float
    sweeps: int
    converged: bool
    seconds: float


def _downsample(colors: np.ndarray, valid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    h2, w2 = colors.shape[0] // 2, colors.shape[1] // 2
    c = colors[: 2 * h2, : 2 * w2].reshape(h2, 2, w2, 2, 3).mean(axis=(1, 3))
    v = valid[: 2 * h2, : 2 * w2].reshape(h2, 2, w2, 2).all(axis=(1, 3))
    return c, v


def _upsample_to(thick: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    up = np.repeat(np.repeat(thick, 2, axis=0), 2, axis=1)
    pad_y = shape[0] - up.shape[0]
    pad_x = shape[1] - up.shape[1]
    if pad_y or pad_x:
        up = np.pad(up, ((0, max(pad_y, 0)), (0, max(pad_x, 0))), mode="edge")
    return up[: shape[0], : shape[1]]


def _run_level(colors, valid, colormap, cfg, init_thick, cs=None, quantized=False):
    if cs is None:
        cs = _candidate_grid(colors, colormap, cfg.k, quantized=quantized)
    if init_thick is None:
        labels = np.zeros(colors.shape[:2], dtype=np.int32)
        thick = cs.thickness_nm[..., 0].copy()
    else:
        labels, thick = _nearest_labels(cs.thickness_nm, cs.count, init_thick)
        thick[~valid] = init_thick[~valid]
    sweeps, converged, energies = _icm_sweeps(
        cs.thickness_nm, cs.distance, cs.count, labels, thick,
        valid, cfg.smoothness_weight, cfg.max_iters,
    )
    for i in range(1, len(energies)):
        if energies[i] > energies[i - 1] * (1 + 1e-9) + 1e-9:
            raise NumericalError(
                f"ICM energy increased: {energies[i - 1]} -> {energies[i]}"
            )
    return thick, float(energies[-1]), int(sweeps), bool(converged)


def reconstruct_regularized(
    img: Interferogram,
    colormap: Colormap,
    cfg: ReconstructConfig | None = None,
    valid: np.ndarray | None = None,
    init_nm: np.ndarray | None = None,
    precomputed: CandidateSet | None = None,
) -> ReconstructResult:
    """Smoothness-regularized labeling; with weight 0 it reduces to the naive solver.

    Coarse-to-fine: solve on mean-pooled pyramids, upsample the thickness map
    as initialization for the next level. A warm start (init_nm) skips the
    pyramid and refines at full resolution only.
    """
    cfg = cfg or ReconstructConfig()
    t0 = time.perf_counter()
    colors = img.pixels.astype(np.float64) / 255.0
    if precomputed is not None and precomputed.thickness_nm.shape != (
        colors.shape[0], colors.shape[1], cfg.k,
    ):
        raise ConfigError("precomputed candidate grid does not match image dims and cfg.k")
    if valid is None:
        valid = np.ones(colors.shape[:2], dtype=bool)
    else:
        valid = np.asarray(valid, dtype=bool)
        if valid.shape != colors.shape[:2]:
            raise ConfigError("validity mask shape must match image")

    pyramid = [(colors, valid)]
    if init_nm is None:
        while (
            len(pyramid) < cfg.multiscale_levels
            and min(pyramid[-1][0].shape[:2]) >= 32
        ):
            pyramid.append(_downsample(*pyramid[-1]))
        init = None
    else:
        init = np.asarray(init_nm, dtype=np.float64)
        if init.shape != colors.shape[:2]:
            raise ConfigError("warm-start shape must match image")

    energy = np.nan
    sweeps_total = 0
    converged = True
    for level_idx, (level_colors, level_valid) in enumerate(reversed(pyramid)):
        if init is not None and init.shape != level_colors.shape[:2]:
            init = _upsample_to(init, level_colors.shape[:2])
        full_res = level_idx == len(pyramid) - 1
        level_cs = precomputed if full_res else None
        if level_cs is None:
            level_cs = _candidate_grid(level_colors, colormap, cfg.k, quantized=full_res)
        if init is None:
            # Cold start: median-filtered per-pixel argmin removes the flip
            # speckle that traps raster descent in wrong-branch regions.
            base = level_cs.thickness_nm[..., 0]
            if not level_valid.all():
                # masked pixels have meaningless argmins; seed them neutrally
                # so their garbage cannot leak into valid neighbors
                base = base.copy()
                base[~level_valid] = np.median(base[level_valid])
            init = ndimage.median_filter(base, size=5)
        thick, energy, sweeps, conv = _run_level(
            level_colors, level_valid, colormap, cfg, init, cs=level_cs, quantized=full_res
        )
        sweeps_total += sweeps
        init = thick
    converged = conv
    field = ThicknessField(values=init, valid=valid)
    return ReconstructResult(
        field=field,
        energy=energy,
        sweeps=sweeps_total,
        converged=converged,
        seconds=time.perf_counter() - t0,
    )


def mean_thickness_series(
    frames: list[Interferogram],
    colormap: Colormap,
    cfg: ReconstructConfig | None = None,
    valid: np.ndarray | None = None,
) -> list[tuple[int, float]]:
    """Mean thickness per frame, warm-starting each solve from the previous one.

    A warm start locks onto the previous frame's fringe branch, which is the
    desired temporal coherence while the film evolves slowly but drifts once
    the film moves by more than a branch spacing. Each frame therefore also
    runs a cold coarse-to-fine solve; the lower-energy labeling wins, with
    ties kept on the warm (coherent) side.
    """
    if not frames:
        raise ConfigError("empty frame sequence")
    cfg = cfg or ReconstructConfig()
    series = []
    prev = None
    for i, frame in enumerate(frames):
        cs = candidates(frame, colormap, cfg.k)
        cold = reconstruct_regularized(frame, colormap, cfg, valid=valid, precomputed=cs)
        result = cold
        if prev is not None:
            warm = reconstruct_regularized(
                frame, colormap, cfg, valid=valid, init_nm=prev, precomputed=cs
            )
            if warm.energy <= cold.energy:
                result = warm
        prev = result.field.values
        series.append((i, float(result.field.values[result.field.valid].mean())))
    return series

"""Procedural thickness profiles: multi-octave gradient noise and Gaussian peaks.

Generators return unit-normalized fields (min exactly 0, max exactly 1);
`apply_range` assigns physical nanometers by drawing a span and offset under a
range constraint. Everything is a pure function of (params, dims, seed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConfigError, NumericalError

MAX_THICKNESS_NM = 5000.0
MIN_FIELD_DIM = 16


def derive_seed(master_seed: int, index: int) -> int:
    """splitmix64-style hash of (master_seed, index); parallel-safe per-item seeds."""
    z = (master_seed + 0x9E3779B97F4A7C15 * (index + 1)) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


@dataclass(frozen=True)
class ThicknessField:
    """2-D grid of film thickness (nm) with a per-pixel validity mask."""

    values: np.ndarray
    valid: np.ndarray | None = None

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise ConfigError("thickness field must be 2-D")
        h, w = vals.shape
        if h < MIN_FIELD_DIM or w < MIN_FIELD_DIM:
            raise ConfigError(f"field dimensions must be >= {MIN_FIELD_DIM}")
        if not np.all(np.isfinite(vals)):
            raise ConfigError("thickness values must be finite")
        if vals.min() < 0.0 or vals.max() > MAX_THICKNESS_NM:
            raise ConfigError(f"thickness values must lie in [0, {MAX_THICKNESS_NM}] nm")
        valid = self.valid
        if valid is None:
            valid = np.ones(vals.shape, dtype=bool)
        else:
            valid = np.ascontiguousarray(valid, dtype=bool)
            if valid.shape != vals.shape:
                raise ConfigError("validity mask shape must match values")
        vals.flags.writeable = False
        valid.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "valid", valid)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def span_nm(self) -> float:
        return float(self.values.max() - self.values.min())


@dataclass(frozen=True)
class PerlinParams:
    persistence: float = 0.5
    lacunarity: float = 1.8
    octaves: int = 4
    scale_px: float = 100.0
    seed: int = 0

    def __post_init__(self):
        if self.persistence <= 0:
            raise ConfigError("persistence must be positive")
        if self.lacunarity < 1.0:
            raise ConfigError("lacunarity must be >= 1")
        if not 1 <= self.octaves <= 8:
            raise ConfigError("octaves must lie in [1, 8]")
        if self.scale_px <= 0:
            raise ConfigError("scale_px must be positive")

    @staticmethod
    def sample(rng: np.random.Generator, seed: int) -> "PerlinParams":
        """Per-item draw over the stock ranges: octaves 1..8, scale 40..150 px."""
        return PerlinParams(
            octaves=int(rng.integers(1, 9)),
            scale_px=float(rng.uniform(40.0, 150.0)),
            seed=seed,
        )


@dataclass(frozen=True)
class GaussianParams:
    n_peaks: int = 100
    sigma_min: float = 0.1
    sigma_max: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_peaks < 1:
            raise ConfigError("n_peaks must be >= 1")
        if not 0 < self.sigma_min <= self.sigma_max:
            raise ConfigError("need 0 < sigma_min <= sigma_max")

    @staticmethod
    def sample(rng: np.random.Generator, seed: int) -> "GaussianParams":
        """Per-item draw over the stock ranges: 30..250 peaks, widths 0.1..0.5."""
        return GaussianParams(n_peaks=int(rng.integers(30, 251)), seed=seed)


@dataclass(frozen=True)
class RangeConstraint:
    abs_min_nm: float = 0.0
    abs_max_nm: float = 4000.0
    span_min_nm: float = 250.0
    span_max_nm: float = 2500.0

    def __post_init__(self):
        if not 0 <= self.abs_min_nm < self.abs_max_nm:
            raise ConfigError("need 0 <= abs_min < abs_max")
        if not 0 < self.span_min_nm <= self.span_max_nm:
            raise ConfigError("need 0 < span_min <= span_max")
        if self.span_max_nm > self.abs_max_nm - self.abs_min_nm:
            raise ConfigError("span_max exceeds the absolute range; constraint infeasible")


# ---------------------------------------------------------------------------
# Gradient ("Perlin") noise

_SQ2 = 1.0 / np.sqrt(2.0)
_GRADS = np.array(
    [(1, 0), (-1, 0), (0, 1), (0, -1),
     (_SQ2, _SQ2), (-_SQ2, _SQ2), (_SQ2, -_SQ2), (-_SQ2, -_SQ2)]
)


@njit(cache=True)
def _perlin_accumulate(width, height, freqs, amps, offsets, perm, grads):
    """Octave-summed lattice gradient noise with the 6t^5 - 15t^4 + 10t^3 fade."""
    out = np.empty((height, width))
    n_oct = freqs.size
    for y in range(height):
        for x in range(width):
            total = 0.0
            for k in range(n_oct):
                px = x * freqs[k] + offsets[k, 0]
                py = y * freqs[k] + offsets[k, 1]
                x0 = int(np.floor(px))
                y0 = int(np.floor(py))
                fx = px - x0
                fy = py - y0
                xi = x0 & 255
                yi = y0 & 255
                aa = perm[perm[xi] + yi]
                ab = perm[perm[xi] + yi + 1]
                ba = perm[perm[xi + 1] + yi]
                bb = perm[perm[xi + 1] + yi + 1]
                n00 = grads[aa & 7, 0] * fx + grads[aa & 7, 1] * fy
                n10 = grads[ba & 7, 0] * (fx - 1.0) + grads[ba & 7, 1] * fy
                n01 = grads[ab & 7, 0] * fx + grads[ab & 7, 1] * (fy - 1.0)
                n11 = grads[bb & 7, 0] * (fx - 1.0) + grads[bb & 7, 1] * (fy - 1.0)
                u = fx * fx * fx * (fx * (fx * 6.0 - 15.0) + 10.0)
                v = fy * fy * fy * (fy * (fy * 6.0 - 15.0) + 10.0)
                nx0 = n00 + u * (n10 - n00)
                nx1 = n01 + u * (n11 - n01)
                total += amps[k] * (nx0 + v * (nx1 - nx0))
            out[y, x] = total
    return out


def _rescale_unit(raw: np.ndarray) -> np.ndarray:
    lo = raw.min()
    hi = raw.max()
    if hi - lo < 1e-12:
        raise NumericalError("degenerate field: zero dynamic range")
    return (raw - lo) / (hi - lo)


def gen_perlin(params: PerlinParams, width: int, height: int) -> ThicknessField:
    """Multi-octave gradient noise, affinely rescaled to [0, 1].

    Octave k samples the lattice at frequency lacunarity**k / scale_px with
    amplitude persistence**k; the permutation table and per-octave lattice
    offsets are drawn from the seed, so output is deterministic in the seed.
    """
    rng = np.random.default_rng(params.seed)
    perm_base = rng.permutation(256)
    perm = np.concatenate([perm_base, perm_base, perm_base[:2]]).astype(np.int64)
    offsets = rng.uniform(0.0, 256.0, size=(params.octaves, 2))

    ks = np.arange(params.octaves, dtype=np.float64)
    freqs = params.lacunarity**ks / params.scale_px
    amps = params.persistence**ks
    total = _perlin_accumulate(width, height, freqs, amps, offsets, perm, _GRADS)
    return ThicknessField(values=_rescale_unit(total))


# ---------------------------------------------------------------------------
# Superimposed Gaussian peaks


def gaussian_bumps(
    centers_xy: np.ndarray,
    sigmas_xy: np.ndarray,
    amplitudes: np.ndarray,
    width: int,
    height: int,
) -> np.ndarray:
    """Sum of axis-aligned anisotropic Gaussian bumps (raw, unnormalized).

    Separability makes this a pair of (n_peaks, axis) profile matrices and one
    matmul, so 250 peaks on 256x256 cost a few ms.
    """
    xs = np.arange(width, dtype=np.float64)
    ys = np.arange(height, dtype=np.float64)
    px = np.exp(-0.5 * ((xs[None, :] - centers_xy[:, 0:1]) / sigmas_xy[:, 0:1]) ** 2)
    py = np.exp(-0.5 * ((ys[None, :] - centers_xy[:, 1:2]) / sigmas_xy[:, 1:2]) ** 2)
    return (amplitudes[:, None] * py).T @ px


def gen_gaussian(params: GaussianParams, width: int, height: int) -> ThicknessField:
    """Randomly placed positive Gaussian peaks, rescaled to [0, 1], seed-deterministic."""
    rng = np.random.default_rng(params.seed)
    centers = np.column_stack(
        [rng.uniform(0.0, width, params.n_peaks), rng.uniform(0.0, height, params.n_peaks)]
    )
    sigmas = rng.uniform(params.sigma_min, params.sigma_max, (params.n_peaks, 2)) * width
    amps = rng.uniform(0.3, 1.0, params.n_peaks)
    raw = gaussian_bumps(centers, sigmas, amps, width, height)
    return ThicknessField(values=_rescale_unit(raw))


def apply_range(
    unit_field: ThicknessField, constraint: RangeConstraint, seed: int
) -> ThicknessField:
    """Map a unit-normalized field to nanometers: values = offset + span * field.

    Span ~ U[span_min, span_max], offset ~ U[abs_min, abs_max - span]; the
    output min/max equal offset and offset + span exactly because the unit
    field attains 0 and 1.
    """
    vals = unit_field.values
    if abs(float(vals.min())) > 1e-9 or abs(float(vals.max()) - 1.0) > 1e-9:
        raise ConfigError("apply_range expects a unit-normalized field (min 0, max 1)")
    if constraint.span_max_nm > constraint.abs_max_nm - constraint.abs_min_nm:
        raise ConfigError("infeasible constraint: span_max exceeds absolute range")
    rng = np.random.default_rng(seed)
    span = rng.uniform(constraint.span_min_nm, constraint.span_max_nm)
    offset = rng.uniform(constraint.abs_min_nm, constraint.abs_max_nm - span)
    return ThicknessField(values=offset + span * vals, valid=unit_field.valid)

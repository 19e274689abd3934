"""Spectral forward model for a single thin film on a substrate.

Reflectance uses the exact three-layer Airy amplitude (all internal
reflections included), averaged over s- and p-polarization, for real
(non-absorbing, dispersionless) indices. The thickness -> RGB lookup table
("colormap") integrates reflectance against illuminant, filter and camera
sensitivity curves and is the bridge between rendering and inversion.

All types are immutable after construction; every function here is pure.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import ConfigError, DataIOError

_CURVE_COMMENT = "#"


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class SpectralCurve:
    """Sampled non-negative function of wavelength; zero outside the sampled range."""

    wavelengths_nm: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        wl = _freeze(np.atleast_1d(self.wavelengths_nm))
        vals = _freeze(np.atleast_1d(self.values))
        if wl.ndim != 1 or vals.shape != wl.shape:
            raise ConfigError("curve wavelengths/values must be 1-D and equal length")
        if wl.size < 2:
            raise ConfigError("curve needs at least 2 samples")
        if not np.all(np.diff(wl) > 0):
            raise ConfigError("curve wavelengths must be strictly ascending")
        if not np.all(np.isfinite(wl)) or not np.all(np.isfinite(vals)):
            raise ConfigError("curve samples must be finite")
        if np.any(vals < 0):
            raise ConfigError("curve values must be non-negative")
        object.__setattr__(self, "wavelengths_nm", wl)
        object.__setattr__(self, "values", vals)

    @property
    def wavelength_min(self) -> float:
        return float(self.wavelengths_nm[0])

    @property
    def wavelength_max(self) -> float:
        return float(self.wavelengths_nm[-1])

    def __call__(self, wavelength_nm) -> np.ndarray:
        lam = np.asarray(wavelength_nm, dtype=np.float64)
        out = np.interp(lam, self.wavelengths_nm, self.values, left=0.0, right=0.0)
        return out if lam.ndim else float(out)

    def scaled(self, factor: float) -> "SpectralCurve":
        if factor <= 0:
            raise ConfigError("scale factor must be positive")
        return SpectralCurve(self.wavelengths_nm, self.values * factor)


@dataclass(frozen=True)
class FilmStack:
    """Refractive indices and incidence geometry of the ambient/film/substrate system."""

    n_ambient: float = 1.0
    n_film: float = 1.337
    n_substrate: float = 1.42
    incidence_angle_deg: float = 0.0

    def __post_init__(self):
        for name in ("n_ambient", "n_film", "n_substrate"):
            if getattr(self, name) < 1.0:
                raise ConfigError(f"{name} must be >= 1.0")
        if not 0.0 <= self.incidence_angle_deg < 90.0:
            raise ConfigError("incidence_angle_deg must be in [0, 90)")

    @property
    def cos_theta_film(self) -> float:
        s1 = math.sin(math.radians(self.incidence_angle_deg))
        s2 = self.n_ambient * s1 / self.n_film
        if s2 >= 1.0:
            raise ConfigError("total internal reflection at ambient/film interface")
        return math.sqrt(1.0 - s2 * s2)


def thickness_period_nm(stack: FilmStack, wavelength_nm: float) -> float:
    """Thickness period of the interference phase: lambda / (2 n_film cos(theta_film))."""
    if wavelength_nm <= 0:
        raise ConfigError("wavelength must be positive")
    return wavelength_nm / (2.0 * stack.n_film * stack.cos_theta_film)


def reflectance(stack: FilmStack, wavelength_nm, thickness_nm):
    """Unpolarized intensity reflectance of the film at the given wavelength(s).

    Exact single-film amplitude r = (r12 + r23 e^{-2i beta}) / (1 + r12 r23 e^{-2i beta})
    with beta = 2 pi n_film h cos(theta_film) / lambda, averaged over s/p polarization.
    Broadcasts over wavelength and thickness; scalars in, scalar out.
    """
    lam = np.asarray(wavelength_nm, dtype=np.float64)
    h = np.asarray(thickness_nm, dtype=np.float64)
    if np.any(lam <= 0):
        raise ConfigError("wavelength must be positive")
    if np.any(h < 0):
        raise ConfigError("thickness must be non-negative")

    n1, n2, n3 = stack.n_ambient, stack.n_film, stack.n_substrate
    c1 = math.cos(math.radians(stack.incidence_angle_deg))
    s1 = math.sin(math.radians(stack.incidence_angle_deg))
    s2 = n1 * s1 / n2
    s3 = n1 * s1 / n3
    if s2 >= 1.0 or s3 >= 1.0:
        raise ConfigError("total internal reflection geometry is not supported")
    c2 = math.sqrt(1.0 - s2 * s2)
    c3 = math.sqrt(1.0 - s3 * s3)

    r12_s = (n1 * c1 - n2 * c2) / (n1 * c1 + n2 * c2)
    r23_s = (n2 * c2 - n3 * c3) / (n2 * c2 + n3 * c3)
    r12_p = (n2 * c1 - n1 * c2) / (n2 * c1 + n1 * c2)
    r23_p = (n3 * c2 - n2 * c3) / (n3 * c2 + n2 * c3)

    phase = np.exp(-4j * np.pi * n2 * c2 * h / lam)
    r_s = (r12_s + r23_s * phase) / (1.0 + r12_s * r23_s * phase)
    r_p = (r12_p + r23_p * phase) / (1.0 + r12_p * r23_p * phase)
    refl = 0.5 * (np.abs(r_s) ** 2 + np.abs(r_p) ** 2)
    return float(refl) if refl.ndim == 0 else refl


@dataclass(frozen=True)
class Colormap:
    """Uniformly gridded thickness -> normalized RGB lookup table."""

    thickness_grid_nm: np.ndarray
    rgb: np.ndarray
    normalization_note: str = ""

    def __post_init__(self):
        grid = _freeze(np.atleast_1d(self.thickness_grid_nm))
        rgb = _freeze(self.rgb)
        if grid.ndim != 1 or grid.size < 2:
            raise ConfigError("colormap grid needs at least 2 samples")
        steps = np.diff(grid)
        if not np.all(steps > 0):
            raise ConfigError("colormap grid must be ascending")
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-9):
            raise ConfigError("colormap grid must be uniformly spaced")
        if rgb.shape != (grid.size, 3):
            raise ConfigError("rgb must have shape (len(grid), 3)")
        if np.any(rgb < 0) or np.any(rgb > 1):
            raise ConfigError("colormap channel values must lie in [0, 1]")
        if float(rgb.max()) != 1.0:
            raise ConfigError("normalization must make the global channel maximum exactly 1")
        object.__setattr__(self, "thickness_grid_nm", grid)
        object.__setattr__(self, "rgb", rgb)

    @property
    def grid_min(self) -> float:
        return float(self.thickness_grid_nm[0])

    @property
    def grid_max(self) -> float:
        return float(self.thickness_grid_nm[-1])

    @property
    def grid_step(self) -> float:
        return float(self.thickness_grid_nm[1] - self.thickness_grid_nm[0])


def lookup(colormap: Colormap, thickness_nm) -> np.ndarray:
    """RGB at the given thickness(es) by linear interpolation; exact at grid nodes."""
    h = np.asarray(thickness_nm, dtype=np.float64)
    if np.any(h < colormap.grid_min) or np.any(h > colormap.grid_max):
        raise ConfigError(
            f"thickness outside colormap range [{colormap.grid_min}, {colormap.grid_max}] nm"
        )
    grid = colormap.thickness_grid_nm
    out = np.empty(h.shape + (3,), dtype=np.float64)
    for c in range(3):
        out[..., c] = np.interp(h, grid, colormap.rgb[:, c])
    return out


def build_colormap(
    stack: FilmStack,
    illuminant: SpectralCurve,
    filter_curve: SpectralCurve,
    sensitivities: tuple[SpectralCurve, SpectralCurve, SpectralCurve],
    grid_min_nm: float = 0.0,
    grid_max_nm: float = 5000.0,
    grid_step_nm: float = 1.0,
) -> Colormap:
    """Integrate reflectance against the spectral chain on a thickness grid.

    Channel c at thickness h is the trapezoid-rule integral of
    illuminant * filter * sensitivity_c * reflectance over the union of all
    curves' sample wavelengths; the three channels are then divided by their
    single global maximum so the output lies in [0, 1] with max exactly 1.
    """
    if grid_step_nm <= 0:
        raise ConfigError("grid step must be positive")
    if grid_max_nm <= grid_min_nm:
        raise ConfigError("grid max must exceed grid min")
    curves = (illuminant, filter_curve) + tuple(sensitivities)
    if len(curves) != 5:
        raise ConfigError("exactly three sensitivity curves are required")
    overlap_lo = max(c.wavelength_min for c in curves)
    overlap_hi = min(c.wavelength_max for c in curves)
    if overlap_hi - overlap_lo < 100.0:
        raise ConfigError(
            f"spectral curves overlap on only [{overlap_lo}, {overlap_hi}] nm; need >= 100 nm"
        )

    lam = np.array(sorted(set(np.concatenate([c.wavelengths_nm for c in curves]))))
    count = int(math.floor((grid_max_nm - grid_min_nm) / grid_step_nm + 1e-9)) + 1
    grid = grid_min_nm + grid_step_nm * np.arange(count)

    weights = illuminant(lam) * filter_curve(lam)
    chan_weights = np.stack([weights * s(lam) for s in sensitivities])  # (3, L)

    # Trapezoid quadrature as a weighted dot product over wavelengths.
    dl = np.diff(lam)
    trap = np.zeros_like(lam)
    trap[:-1] += 0.5 * dl
    trap[1:] += 0.5 * dl

    refl = reflectance(stack, lam[:, None], grid[None, :])  # (L, N)
    channels = (chan_weights * trap) @ refl  # (3, N)

    peak = float(channels.max())
    if peak <= 0.0:
        raise ConfigError("all-dark configuration: spectral integrals are zero everywhere")
    rgb = (channels / peak).T
    note = f"all channels divided by global maximum {peak:.9g}"
    return Colormap(thickness_grid_nm=grid, rgb=rgb, normalization_note=note)


# ---------------------------------------------------------------------------
# File formats


def load_curve(path) -> SpectralCurve:
    """Read a two-column `wavelength_nm<TAB>value` text file ('#' comments allowed)."""
    wl, vals = [], []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for ln, line in enumerate(fh, start=1):
                line = line.split(_CURVE_COMMENT, 1)[0].strip()
                if not line:
                    continue
                parts = line.split()
                if len(parts) != 2:
                    raise DataIOError(f"{path}:{ln}: expected two columns, got {len(parts)}")
                wl.append(float(parts[0]))
                vals.append(float(parts[1]))
    except OSError as exc:
        raise DataIOError(f"cannot read spectral curve {path}: {exc}") from exc
    if len(wl) < 2:
        raise DataIOError(f"{path}: fewer than 2 samples")
    return SpectralCurve(np.array(wl), np.array(vals))


def save_curve(curve: SpectralCurve, path, comment: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        for w, v in zip(curve.wavelengths_nm, curve.values):
            fh.write(f"{w:.9g}\t{v:.9g}\n")


_COLORMAP_MAGIC = "filmetric-colormap-v1"


def save_colormap(colormap: Colormap, path) -> None:
    """Versioned text format: header with grid min/step/count, one `h r g b` row per sample."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"{_COLORMAP_MAGIC} min_nm={colormap.grid_min:.9g} "
            f"step_nm={colormap.grid_step:.9g} count={colormap.thickness_grid_nm.size}\n"
        )
        if colormap.normalization_note:
            fh.write(f"# {colormap.normalization_note}\n")
        for h, (r, g, b) in zip(colormap.thickness_grid_nm, colormap.rgb):
            fh.write(f"{h:.9g} {r:.9g} {g:.9g} {b:.9g}\n")


def load_colormap(path) -> Colormap:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataIOError(f"cannot read colormap {path}: {exc}") from exc
    if not lines or not lines[0].startswith(_COLORMAP_MAGIC):
        raise DataIOError(f"{path}: not a {_COLORMAP_MAGIC} file")
    header = dict(kv.split("=", 1) for kv in lines[0].split()[1:])
    try:
        gmin = float(header["min_nm"])
        gstep = float(header["step_nm"])
        count = int(header["count"])
    except (KeyError, ValueError) as exc:
        raise DataIOError(f"{path}: malformed header: {exc}") from exc
    note = ""
    rows = []
    for line in lines[1:]:
        if line.startswith(_CURVE_COMMENT):
            note = line.lstrip("# ").strip() or note
            continue
        if not line.strip():
            continue
        rows.append([float(tok) for tok in line.split()])
    data = np.array(rows)
    if data.shape != (count, 4):
        raise DataIOError(f"{path}: expected {count} rows of 4 columns, got {data.shape}")
    grid = gmin + gstep * np.arange(count)
    if not np.allclose(data[:, 0], grid, atol=max(1e-6, 1e-9 * abs(gstep) * count)):
        raise DataIOError(f"{path}: row thicknesses disagree with header grid")
    return Colormap(thickness_grid_nm=grid, rgb=np.clip(data[:, 1:], 0.0, 1.0),
                    normalization_note=note)


def colormap_to_csv(colormap: Colormap, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("thickness_nm,r,g,b\n")
        for h, (r, g, b) in zip(colormap.thickness_grid_nm, colormap.rgb):
            fh.write(f"{h:.9g},{r:.9g},{g:.9g},{b:.9g}\n")


def colormap_sha256(colormap: Colormap) -> str:
    """Checksum of the canonical text serialization (content identity for manifests)."""
    payload = [f"{_COLORMAP_MAGIC} {colormap.grid_min:.9g} {colormap.grid_step:.9g}"]
    payload += [
        f"{h:.9g} {r:.9g} {g:.9g} {b:.9g}"
        for h, (r, g, b) in zip(colormap.thickness_grid_nm, colormap.rgb)
    ]
    return hashlib.sha256("\n".join(payload).encode()).hexdigest()


# ---------------------------------------------------------------------------
# Bundled default spectral data: flat white illuminant, a tri-band filter
# (Gaussian passbands at 460/540/620 nm, FWHM 25 nm) and Gaussian camera
# sensitivities at 620/540/460 nm (FWHM 60 nm) for R/G/B.


def _bundled(name: str) -> SpectralCurve:
    ref = resources.files("filmetric").joinpath("data").joinpath(name)
    with resources.as_file(ref) as path:
        return load_curve(path)


def default_illuminant() -> SpectralCurve:
    return _bundled("illuminant_flat.txt")


def default_filter() -> SpectralCurve:
    return _bundled("filter_triband.txt")


def default_sensitivities() -> tuple[SpectralCurve, SpectralCurve, SpectralCurve]:
    return (
        _bundled("sensitivity_r.txt"),
        _bundled("sensitivity_g.txt"),
        _bundled("sensitivity_b.txt"),
    )


def default_colormap(
    stack: FilmStack | None = None,
    grid_min_nm: float = 0.0,
    grid_max_nm: float = 5000.0,
    grid_step_nm: float = 1.0,
) -> Colormap:
    """Colormap for the default tear-film-on-lens stack and bundled curves."""
    return build_colormap(
        stack or FilmStack(),
        default_illuminant(),
        default_filter(),
        default_sensitivities(),
        grid_min_nm=grid_min_nm,
        grid_max_nm=grid_max_nm,
        grid_step_nm=grid_step_nm,
    )

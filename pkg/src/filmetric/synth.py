"""Interferogram rendering and the stochastic augmentation pipeline.

Rendering is a pure per-pixel colormap lookup followed by 8-bit quantization.
Augmentation keeps image and thickness field paired: geometric ops (crops,
flips) transform both, photometric ops touch the image only, and occlusions
are recorded in the field's validity mask so downstream losses/metrics can
skip them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from matplotlib.colors import hsv_to_rgb, rgb_to_hsv
from scipy import ndimage

from .errors import ConfigError
from .fieldgen import ThicknessField, derive_seed
from .optics import Colormap, lookup


@dataclass(frozen=True)
class Interferogram:
    """8-bit RGB fringe image."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.ascontiguousarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ConfigError("interferogram pixels must have shape (H, W, 3)")
        if px.dtype != np.uint8:
            raise ConfigError("interferogram pixels must be uint8")
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def render(field: ThicknessField, colormap: Colormap) -> Interferogram:
    """Map thickness to color per pixel: round(255 * colormap(thickness))."""
    rgb = lookup(colormap, field.values)
    return Interferogram(pixels=np.rint(255.0 * rgb).astype(np.uint8))


@dataclass(frozen=True)
class AugmentConfig:
    """Switchboard for the augmentation pipeline; all ops off by default."""

    five_crop: bool = False
    crop_size: int = 128
    flip_h: bool = False
    flip_v: bool = False
    p_flip: float = 0.5
    pupil_mask: bool = False
    pupil_diameter_px: tuple[float, float] = (30.0, 50.0)
    shadow: bool = False
    shadow_max_attenuation: float = 0.5
    gaussian_blur: bool = False
    blur_sigma: tuple[float, float] = (0.1, 3.0)
    color_jitter: bool = False
    jitter_brightness: float = 0.2
    jitter_contrast: float = 0.2
    jitter_saturation: float = 0.2
    jitter_hue: float = 0.02
    gaussian_noise: bool = False
    noise_std: float = 10.0
    p_gaussian_noise: float = 0.5
    poisson_noise: bool = False
    poisson_lam: float = 15.0
    p_poisson_noise: float = 0.5
    mean_filter: bool = False
    p_mean_filter: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for p in (self.p_flip, self.p_gaussian_noise, self.p_poisson_noise, self.p_mean_filter):
            if not 0.0 <= p <= 1.0:
                raise ConfigError("probabilities must lie in [0, 1]")
        lo, hi = self.blur_sigma
        if not 0.1 <= lo <= hi <= 3.0:
            raise ConfigError("blur sigma range must lie within [0.1, 3.0]")
        lo, hi = self.pupil_diameter_px
        if not 30.0 <= lo <= hi <= 50.0:
            raise ConfigError("pupil diameter range must lie within [30, 50] px")
        if self.crop_size < 16:
            raise ConfigError("crop size must be >= 16")
        if self.shadow_max_attenuation < 0 or self.shadow_max_attenuation > 1:
            raise ConfigError("shadow_max_attenuation must lie in [0, 1]")

    @staticmethod
    def stock(seed: int = 0, crop_size: int = 128) -> "AugmentConfig":
        """Everything enabled at the stock strengths."""
        return AugmentConfig(
            five_crop=True,
            crop_size=crop_size,
            flip_h=True,
            flip_v=True,
            pupil_mask=True,
            shadow=True,
            gaussian_blur=True,
            color_jitter=True,
            gaussian_noise=True,
            poisson_noise=True,
            mean_filter=True,
            seed=seed,
        )


@dataclass(frozen=True)
class AugmentedPair:
    image: Interferogram
    field: ThicknessField
    ops: tuple


def five_crop(
    img: Interferogram, field: ThicknessField, size: int
) -> list[tuple[Interferogram, ThicknessField, dict]]:
    """Four corner crops plus the center crop, image and field in lockstep."""
    h, w = img.height, img.width
    if size > h or size > w:
        raise ConfigError(f"crop size {size} exceeds image dims {h}x{w}")
    cy, cx = (h - size) // 2, (w - size) // 2
    corners = [(0, 0), (0, w - size), (h - size, 0), (h - size, w - size), (cy, cx)]
    out = []
    for y0, x0 in corners:
        sl = np.s_[y0:y0 + size, x0:x0 + size]
        out.append(
            (
                Interferogram(pixels=img.pixels[sl].copy()),
                ThicknessField(values=field.values[sl].copy(), valid=field.valid[sl].copy()),
                {"op": "crop", "y0": int(y0), "x0": int(x0), "size": int(size)},
            )
        )
    return out


def _clamp(img: np.ndarray) -> np.ndarray:
    return np.clip(img, 0.0, 255.0)


def _luma(img: np.ndarray) -> np.ndarray:
    return 0.299 * img[..., 0] + 0.587 * img[..., 1] + 0.114 * img[..., 2]


def _apply_photometric_op(img: np.ndarray, op: dict) -> np.ndarray:
    """One recorded photometric op on a float image in [0, 255]."""
    name = op["op"]
    if name == "pupil_mask":
        h, w = img.shape[:2]
        ys, xs = np.ogrid[0:h, 0:w]
        disk = (xs - op["cx"]) ** 2 + (ys - op["cy"]) ** 2 <= (op["diameter"] / 2.0) ** 2
        img = img.copy()
        img[disk] = 0.0
    elif name == "shadow":
        h, w = img.shape[:2]
        ys, xs = np.ogrid[0:h, 0:w]
        proj = xs * np.cos(op["angle"]) + ys * np.sin(op["angle"])
        t = (proj - proj.min()) / max(proj.max() - proj.min(), 1e-12)
        img = img * (1.0 + (op["factor"] - 1.0) * t)[..., None]
    elif name == "gaussian_blur":
        img = ndimage.gaussian_filter(img, sigma=(op["sigma"], op["sigma"], 0.0))
    elif name == "color_jitter":
        img = img * op["brightness"]
        img = _clamp(img)
        m = _luma(img).mean()
        img = _clamp((img - m) * op["contrast"] + m)
        gray = _luma(img)[..., None]
        img = _clamp(gray + op["saturation"] * (img - gray))
        hsv = rgb_to_hsv(img / 255.0)
        hsv[..., 0] = (hsv[..., 0] + op["hue"]) % 1.0
        img = hsv_to_rgb(hsv) * 255.0
    elif name == "mean_filter":
        img = ndimage.uniform_filter(img, size=(3, 3, 1), mode="reflect")
    else:
        raise ConfigError(f"op {name!r} is not replayable")
    return _clamp(img)


def replay_photometric(img: Interferogram, ops) -> Interferogram:
    """Re-apply recorded deterministic photometric ops (noise ops cannot replay)."""
    out = img.pixels.astype(np.float64)
    for op in ops:
        if op["op"] in ("crop", "flip_h", "flip_v"):
            continue
        out = _apply_photometric_op(out, op)
    return Interferogram(pixels=np.rint(out).astype(np.uint8))


def augment(
    img: Interferogram, field: ThicknessField, cfg: AugmentConfig
) -> list[AugmentedPair]:
    """Run the augmentation pipeline; returns 5 pairs under five-crop, else 1.

    Geometric ops keep (image, field, mask) aligned; photometric ops touch the
    image only; the pupil mask blacks out a disk and invalidates it in the
    mask. Each output pair draws from its own seed derived from cfg.seed, so
    the whole list is a pure function of (img, field, cfg).
    """
    if img.pixels.shape[:2] != field.values.shape:
        raise ConfigError("image and field dimensions must match")
    if cfg.five_crop:
        bases = five_crop(img, field, cfg.crop_size)
    else:
        bases = [(img, field, None)]

    out = []
    for idx, (bimg, bfield, crop_op) in enumerate(bases):
        rng = np.random.default_rng(derive_seed(cfg.seed, idx))
        ops: list[dict] = [] if crop_op is None else [crop_op]
        pixels = bimg.pixels
        values = bfield.values
        valid = bfield.valid

        if cfg.flip_h and rng.random() < cfg.p_flip:
            pixels = pixels[:, ::-1]
            values = values[:, ::-1]
            valid = valid[:, ::-1]
            ops.append({"op": "flip_h"})
        if cfg.flip_v and rng.random() < cfg.p_flip:
            pixels = pixels[::-1, :]
            values = values[::-1, :]
            valid = valid[::-1, :]
            ops.append({"op": "flip_v"})

        fimg = pixels.astype(np.float64)
        h, w = fimg.shape[:2]

        if cfg.pupil_mask:
            d = rng.uniform(*cfg.pupil_diameter_px)
            cx = rng.uniform(0, w)
            cy = rng.uniform(0, h)
            op = {"op": "pupil_mask", "cx": cx, "cy": cy, "diameter": d}
            fimg = _apply_photometric_op(fimg, op)
            ys, xs = np.ogrid[0:h, 0:w]
            disk = (xs - cx) ** 2 + (ys - cy) ** 2 <= (d / 2.0) ** 2
            valid = valid & ~disk
            ops.append(op)
        if cfg.shadow:
            op = {
                "op": "shadow",
                "angle": rng.uniform(0.0, 2.0 * np.pi),
                "factor": rng.uniform(1.0 - cfg.shadow_max_attenuation, 1.0),
            }
            fimg = _apply_photometric_op(fimg, op)
            ops.append(op)
        if cfg.gaussian_blur:
            op = {"op": "gaussian_blur", "sigma": rng.uniform(*cfg.blur_sigma)}
            fimg = _apply_photometric_op(fimg, op)
            ops.append(op)
        if cfg.color_jitter:
            op = {
                "op": "color_jitter",
                "brightness": rng.uniform(1 - cfg.jitter_brightness, 1 + cfg.jitter_brightness),
                "contrast": rng.uniform(1 - cfg.jitter_contrast, 1 + cfg.jitter_contrast),
                "saturation": rng.uniform(1 - cfg.jitter_saturation, 1 + cfg.jitter_saturation),
                "hue": rng.uniform(-cfg.jitter_hue, cfg.jitter_hue),
            }
            fimg = _apply_photometric_op(fimg, op)
            ops.append(op)
        if cfg.gaussian_noise and rng.random() < cfg.p_gaussian_noise:
            fimg = _clamp(fimg + rng.normal(0.0, cfg.noise_std, fimg.shape))
            ops.append({"op": "gaussian_noise", "std": cfg.noise_std})
        if cfg.poisson_noise and rng.random() < cfg.p_poisson_noise:
            # Zero-mean shot noise: one Poisson draw per pixel, shared across
            # channels; semantics recorded so datasets are self-describing.
            counts = rng.poisson(cfg.poisson_lam, fimg.shape[:2]).astype(np.float64)
            fimg = _clamp(fimg + (counts - cfg.poisson_lam)[..., None])
            ops.append({"op": "poisson_noise", "lam": cfg.poisson_lam,
                        "semantics": "additive zero-mean, per-pixel draw shared across channels"})
        if cfg.mean_filter and rng.random() < cfg.p_mean_filter:
            op = {"op": "mean_filter", "size": 3}
            fimg = _apply_photometric_op(fimg, op)
            ops.append(op)

        out.append(
            AugmentedPair(
                image=Interferogram(pixels=np.rint(fimg).astype(np.uint8)),
                field=ThicknessField(values=values.copy(), valid=valid.copy()),
                ops=tuple(ops),
            )
        )
    return out

import numpy as np
import pytest

from filmetric import optics


@pytest.fixture(scope="session")
def stock_stack():
    return optics.FilmStack()


@pytest.fixture(scope="session")
def broadband_colormap():
    """The full default colormap (0..5000 nm, 1 nm step); built once per session."""
    return optics.default_colormap()


def monochromatic_curves(center_nm=550.0):
    """Curve set whose trapezoid integral reduces exactly to the single center
    wavelength: all curves share the sample grid and the illuminant is a unit
    spike at the center, so every other union point contributes zero.
    """
    wl = np.array([380.0, center_nm - 1.0, center_nm, center_nm + 1.0, 780.0])
    spike = optics.SpectralCurve(wl, np.array([0.0, 0.0, 1.0, 0.0, 0.0]))
    flat = optics.SpectralCurve(wl, np.ones_like(wl))
    return spike, flat, (flat, flat, flat)


@pytest.fixture(scope="session")
def mono_colormap(stock_stack):
    """Single-wavelength colormap with grid step = period/200, so thicknesses an
    exact period apart land on congruent grid offsets (interpolation aligns)."""
    period = optics.thickness_period_nm(stock_stack, 550.0)
    step = period / 200.0
    spike, flat, sens = monochromatic_curves(550.0)
    return optics.build_colormap(
        stock_stack, spike, flat, sens,
        grid_min_nm=0.0, grid_max_nm=step * 4000, grid_step_nm=step,
    )

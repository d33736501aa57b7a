import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ocmsim import Aperture, GridSpec, ImagingSystem


@pytest.fixture
def reference_system() -> ImagingSystem:
    """The low-NA single-lens geometry used throughout: R = 1.38 mm,
    s_o = 355 mm, 810 nm, m = 2.4."""
    return ImagingSystem(pupil_radius=1.38e-3, object_distance=0.355,
                         wavelength=810e-9, magnification=2.4)


@pytest.fixture
def triple_slit() -> Aperture:
    return Aperture.slits(3, 70e-6, 110e-6, slit_length=300e-6)


@pytest.fixture
def psf_grid(reference_system) -> GridSpec:
    """Object-plane grid resolving the PSF with wide margins."""
    r0 = reference_system.first_zero_radius
    return GridSpec.centered(512, r0 / 8)


def fwhm_of(x, y) -> float:
    """Half-maximum full width by linear interpolation (test-local helper)."""
    y = np.asarray(y, float)
    c = int(np.argmax(y))
    half = y[c] / 2.0
    left = np.flatnonzero(y[:c] < half)[-1]
    right = c + np.flatnonzero(y[c:] < half)[0]
    xl = x[left] + (half - y[left]) * (x[left + 1] - x[left]) / (y[left + 1] - y[left])
    xr = x[right - 1] + (half - y[right - 1]) * (x[right] - x[right - 1]) \
        / (y[right] - y[right - 1])
    return xr - xl


def first_zero_of(x, y) -> float:
    """First sign change of y along x >= 0 (y sampled on a centered axis)."""
    c = int(np.argmin(np.abs(x)))
    row = np.asarray(y, float)[c:]
    sign = np.flatnonzero(np.diff(np.signbit(row)))
    i = sign[0]
    frac = row[i] / (row[i] - row[i + 1])
    return (i + frac) * (x[1] - x[0])

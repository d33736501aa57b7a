"""Sampled scalar Fourier optics: PSFs, convolution, classical imaging.

Conventions
-----------
* Object-plane coordinates are canonical; image-plane axes are object axes
  relabeled by the magnification m (translation-invariant PSF, paraxial
  single-lens regime where the residual quadratic phase is negligible).
* PSFs are normalized to h(0) = 1; images are reported in arbitrary units.
* Continuous-FT convention: f~(q) = Integral f(rho) exp(-i q.rho) d^2 rho,
  inverse carries 1/(2 pi)^2.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import j1

from .errors import GridTooCoarse, SpacingMismatch, WrongPupilProfile
from .grid import FieldGrid, GridSpec

#: first positive root of the Bessel function J1
J1_FIRST_ZERO = 3.8317059702075125


def somb(x):
    """Sombrero function 2*J1(x)/x with the removable singularity somb(0)=1.

    Even in x; first zero at x = 3.8317...
    """
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    nz = x != 0
    out[nz] = 2.0 * j1(x[nz]) / x[nz]
    if out.ndim == 0:
        return float(out)
    return out


class PupilProfile(enum.Enum):
    HARD_CIRCULAR = "hard"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class ImagingSystem:
    """Single-lens imaging geometry: pupil, object distance, wavelength."""

    pupil_radius: float          # R, meters
    object_distance: float       # s_o, meters
    wavelength: float            # lambda, meters
    magnification: float         # m, dimensionless > 0
    pupil_profile: PupilProfile = PupilProfile.HARD_CIRCULAR
    pupil_sigma: float | None = None   # Gaussian pupil std in the pupil plane, meters

    def __post_init__(self) -> None:
        for name in ("pupil_radius", "object_distance", "wavelength"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.magnification <= 0:
            raise ValueError("magnification must be > 0")
        if self.pupil_profile is PupilProfile.GAUSSIAN and not self.pupil_sigma:
            raise ValueError("Gaussian pupil needs pupil_sigma")

    def with_wavelength(self, wavelength: float) -> "ImagingSystem":
        return ImagingSystem(self.pupil_radius, self.object_distance, wavelength,
                             self.magnification, self.pupil_profile, self.pupil_sigma)

    @property
    def first_zero_radius(self) -> float:
        """Object-plane radius of the first PSF zero (hard circular pupil)."""
        return J1_FIRST_ZERO * self.object_distance * self.wavelength / (
            2.0 * np.pi * self.pupil_radius)

    @property
    def rayleigh_radius(self) -> float:
        """Rayleigh resolution radius 1.22 lambda s_o / (2R), object-plane."""
        return 1.22 * self.wavelength * self.object_distance / (2.0 * self.pupil_radius)

    @property
    def psf_sigma(self) -> float:
        """Object-plane std of the Gaussian PSF (Gaussian pupil only)."""
        if self.pupil_profile is not PupilProfile.GAUSSIAN:
            raise WrongPupilProfile("psf_sigma defined for Gaussian pupils only")
        return self.object_distance * self.wavelength / (
            2.0 * np.pi * self.pupil_sigma)

    def psf_amplitude(self, x, y, order: int = 1):
        """PSF amplitude h at object-plane offsets, h(0)=1.

        ``order`` scales the argument (order N gives the N-photon centroid
        PSF shape for this pupil).
        """
        r = np.hypot(x, y)
        if self.pupil_profile is PupilProfile.HARD_CIRCULAR:
            return somb(2.0 * np.pi * self.pupil_radius * order * r
                        / (self.object_distance * self.wavelength))
        sigma = self.psf_sigma
        return np.exp(-order * r ** 2 / (2.0 * sigma ** 2))


# ---------------------------------------------------------------------------
# Apertures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Aperture:
    """Object transmission function, |A| <= 1 everywhere.

    Analytic primitives rasterize by pixel-center sampling; slit patterns run
    along y with the pattern axis along x.  ``mask`` holds an arbitrary grid
    aperture instead.
    """

    kind: str                       # point|slits|rectangle|gaussian_spot|uniform|mask
    line_width: float = 0.0         # slit width along x, meters
    pitch: float = 0.0              # slit center-to-center distance, meters
    n_slits: int = 0
    slit_length: float | None = None   # extent along y; None = unbounded
    size: tuple[float, float] = (0.0, 0.0)   # rectangle (wx, wy)
    waist: float = 0.0              # Gaussian 1/e amplitude radius, meters
    center: tuple[float, float] = (0.0, 0.0)
    mask: FieldGrid | None = None

    # -- constructors ---------------------------------------------------------
    @classmethod
    def point(cls, center=(0.0, 0.0)) -> "Aperture":
        return cls("point", center=center)

    @classmethod
    def slits(cls, n_slits: int, line_width: float, pitch: float = 0.0,
              slit_length: float | None = None, center=(0.0, 0.0)) -> "Aperture":
        if n_slits < 1:
            raise ValueError("n_slits >= 1")
        if n_slits > 1 and pitch <= line_width:
            raise ValueError("pitch must exceed line width")
        return cls("slits", line_width=line_width, pitch=pitch, n_slits=n_slits,
                   slit_length=slit_length, center=center)

    @classmethod
    def rectangle(cls, wx: float, wy: float, center=(0.0, 0.0)) -> "Aperture":
        return cls("rectangle", size=(wx, wy), center=center)

    @classmethod
    def gaussian_spot(cls, waist: float, center=(0.0, 0.0)) -> "Aperture":
        return cls("gaussian_spot", waist=waist, center=center)

    @classmethod
    def uniform(cls) -> "Aperture":
        return cls("uniform")

    @classmethod
    def from_mask(cls, mask: FieldGrid) -> "Aperture":
        if np.abs(mask.values).max() > 1 + 1e-12:
            raise ValueError("mask amplitude must satisfy |A| <= 1")
        return cls("mask", mask=mask)

    def slit_centers(self) -> np.ndarray:
        offsets = (np.arange(self.n_slits) - (self.n_slits - 1) / 2.0) * self.pitch
        return self.center[0] + offsets

    # -- evaluation -----------------------------------------------------------
    def amplitude(self, x, y):
        """Analytic amplitude at positions (point kind excluded)."""
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        cx, cy = self.center
        if self.kind == "uniform":
            return np.ones(np.broadcast(x, y).shape)
        if self.kind == "rectangle":
            wx, wy = self.size
            return ((np.abs(x - cx) <= wx / 2) & (np.abs(y - cy) <= wy / 2)
                    ).astype(float)
        if self.kind == "gaussian_spot":
            return np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / self.waist ** 2)
        if self.kind == "slits":
            out = np.zeros(np.broadcast(x, y).shape)
            for sx in self.slit_centers():
                out = np.maximum(out, (np.abs(x - sx) <= self.line_width / 2
                                       ).astype(float))
            if self.slit_length is not None:
                out = out * (np.abs(y - cy) <= self.slit_length / 2)
            return out
        if self.kind == "mask":
            return self.mask.interpolate(np.stack(
                np.broadcast_arrays(x, y), axis=-1))
        raise ValueError(f"no analytic form for aperture kind {self.kind!r}")

    def rasterize(self, spec: GridSpec) -> FieldGrid:
        """Deterministic pixel-center rasterization onto a grid."""
        if self.kind == "point":
            values = np.zeros((spec.nx, spec.ny))
            ix = int(np.argmin(np.abs(spec.x_axis() - self.center[0])))
            iy = int(np.argmin(np.abs(spec.y_axis() - self.center[1])))
            values[ix, iy] = 1.0
            return FieldGrid.from_spec(spec, values)
        if self.kind == "mask" and self.mask is not None and self.mask.spec == spec:
            return self.mask.copy()
        return FieldGrid.sample(spec, self.amplitude)

    def typical_extent(self) -> float:
        """Rough full object size along x, used for default grid sizing."""
        if self.kind == "slits":
            return (self.n_slits - 1) * self.pitch + self.line_width
        if self.kind == "rectangle":
            return max(self.size)
        if self.kind == "gaussian_spot":
            return 6.0 * self.waist
        if self.kind == "mask":
            return max(self.mask.extent())
        return 0.0


# ---------------------------------------------------------------------------
# Core operations
# ---------------------------------------------------------------------------

def single_lens_psf(system: ImagingSystem, spec: GridSpec,
                    order: int = 1) -> FieldGrid:
    """Sample the object-plane PSF h on the grid, h(0) = 1.

    Raises GridTooCoarse when the spacing under-samples the PSF (fewer than
    4 samples per first-zero radius for the hard pupil, or per Gaussian std).
    """
    if system.pupil_profile is PupilProfile.HARD_CIRCULAR:
        limit = system.first_zero_radius / order / 4.0
    else:
        limit = system.psf_sigma / np.sqrt(order) / 2.0
    if spec.dx > limit or spec.dy > limit:
        raise GridTooCoarse(
            f"spacing {max(spec.dx, spec.dy):.3g} m exceeds {limit:.3g} m "
            "needed to sample the PSF")
    return FieldGrid.sample(spec, lambda x, y: system.psf_amplitude(x, y, order))


def convolve2d(f: FieldGrid, g: FieldGrid) -> FieldGrid:
    """Linear convolution (f*g)(rho) = Integral f g, discretized as sum*dx*dy.

    Spectral method with zero padding (no wrap-around); the output covers the
    combined support, with origin = f.origin + g.origin.
    """
    if not f.same_spacing(g):
        raise SpacingMismatch(
            f"spacings differ: ({f.dx}, {f.dy}) vs ({g.dx}, {g.dy})")
    values = fftconvolve(f.values, g.values) * f.dx * f.dy
    if not (f.is_complex or g.is_complex):
        values = values.real
    origin = (f.origin[0] + g.origin[0], f.origin[1] + g.origin[1])
    return FieldGrid(values, f.dx, f.dy, origin)


def convolve_on(f: FieldGrid, kernel: FieldGrid) -> FieldGrid:
    """Linear convolution evaluated on f's own grid.

    The kernel grid must contain a sample at the physical origin so the full
    convolution lands on f's sample positions exactly.
    """
    full = convolve2d(f, kernel)
    # the kernel's origin-sample index gives f's alignment inside the output
    ox = round(-kernel.origin[0] / kernel.dx)
    oy = round(-kernel.origin[1] / kernel.dy)
    if (abs(kernel.origin[0] + ox * kernel.dx) > 1e-9 * kernel.dx
            or abs(kernel.origin[1] + oy * kernel.dy) > 1e-9 * kernel.dy):
        raise SpacingMismatch("kernel grid has no sample at the origin")
    values = full.values[ox:ox + f.nx, oy:oy + f.ny]
    return FieldGrid(values, f.dx, f.dy, f.origin)


def _image_from_convolution(conv: FieldGrid, magnification: float) -> FieldGrid:
    """Relabel object-plane axes by m to express the image plane."""
    return FieldGrid(conv.values, conv.dx * magnification, conv.dy * magnification,
                     (conv.origin[0] * magnification, conv.origin[1] * magnification))


def _kernel_spec(spec: GridSpec) -> GridSpec:
    """Centered kernel grid covering every pairwise difference of ``spec``.

    A kernel rasterized on the object grid itself would truncate the PSF at
    half the needed support; doubling the sample count makes the cropped
    convolution include all difference terms exactly.
    """
    return GridSpec.centered(2 * spec.nx, spec.dx, 2 * spec.ny, spec.dy)


def coherent_image(aperture: Aperture, system: ImagingSystem,
                   spec: GridSpec) -> FieldGrid:
    """Coherent image intensity |(A * h)(rho/m)|^2 on the image-plane grid.

    ``spec`` is the object-plane grid; the returned grid has its axes scaled
    by the magnification.  Nonnegative everywhere.
    """
    a = aperture.rasterize(spec)
    h = single_lens_psf(system, _kernel_spec(spec))
    conv = convolve_on(a, h)
    img = _image_from_convolution(conv, system.magnification)
    img.values = np.abs(img.values) ** 2
    return img


def incoherent_image(aperture: Aperture, system: ImagingSystem,
                     spec: GridSpec) -> FieldGrid:
    """Incoherent image (|A|^2 * |h|^2)(rho/m) on the image-plane grid."""
    a = aperture.rasterize(spec)
    a.values = np.abs(a.values) ** 2
    h = single_lens_psf(system, _kernel_spec(spec))
    h.values = np.abs(h.values) ** 2
    conv = convolve_on(a, h)
    img = _image_from_convolution(conv, system.magnification)
    img.values = img.values.real.clip(min=0.0)
    return img


class FtDirection(enum.Enum):
    FORWARD = "forward"
    INVERSE = "inverse"


def fourier_transform_2d(f: FieldGrid, direction: FtDirection = FtDirection.FORWARD,
                         out_origin: tuple[float, float] | None = None) -> FieldGrid:
    """Continuous-convention Fourier transform between rho- and q-domains.

    Forward: f~(q) = sum f(rho) exp(-i q.rho) dx dy on the centered q grid.
    Inverse carries the 1/(2 pi)^2 factor and maps back to a centered spatial
    grid (or to ``out_origin`` when given, e.g. to undo a forward transform of
    a non-centered grid).  Forward then Inverse is the identity to 1e-10.
    """
    nx, ny = f.nx, f.ny
    if direction is FtDirection.FORWARD:
        dqx = 2.0 * np.pi / (nx * f.dx)
        dqy = 2.0 * np.pi / (ny * f.dy)
        qx = (np.arange(nx) - nx // 2) * dqx
        qy = (np.arange(ny) - ny // 2) * dqy
        spectrum = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(f.values)))
        spectrum = spectrum * (f.dx * f.dy)
        # center sample of the pre-shift grid sat at index (nx//2, ny//2);
        # account for the true origin with an explicit phase ramp
        x0 = f.origin[0] + (nx // 2) * f.dx
        y0 = f.origin[1] + (ny // 2) * f.dy
        if x0 != 0.0 or y0 != 0.0:
            spectrum = spectrum * np.exp(-1j * (qx[:, None] * x0 + qy[None, :] * y0))
        return FieldGrid(spectrum, dqx, dqy, (qx[0], qy[0]))

    # inverse: f.values live on a q grid
    dxo = 2.0 * np.pi / (nx * f.dx)
    dyo = 2.0 * np.pi / (ny * f.dy)
    if out_origin is None:
        out_origin = (-(nx // 2) * dxo, -(ny // 2) * dyo)
    qx = f.x_axis()
    qy = f.y_axis()
    # target center position relative to the implicit centered output grid
    x0 = out_origin[0] + (nx // 2) * dxo
    y0 = out_origin[1] + (ny // 2) * dyo
    vals = f.values
    if x0 != 0.0 or y0 != 0.0:
        vals = vals * np.exp(1j * (qx[:, None] * x0 + qy[None, :] * y0))
    field = np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(vals)))
    field = field * (nx * f.dx * ny * f.dy) / (2.0 * np.pi) ** 2
    # q grids whose center sample is not q=0 add a position-space phase ramp
    dqx_off = f.origin[0] + (nx // 2) * f.dx
    dqy_off = f.origin[1] + (ny // 2) * f.dy
    if dqx_off != 0.0 or dqy_off != 0.0:
        cx = (np.arange(nx) - nx // 2) * dxo
        cy = (np.arange(ny) - ny // 2) * dyo
        field = field * np.exp(1j * (dqx_off * cx[:, None] + dqy_off * cy[None, :]))
    return FieldGrid(field, dxo, dyo, out_origin)

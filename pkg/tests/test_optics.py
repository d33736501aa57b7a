import numpy as np
import pytest

from ocmsim import (Aperture, FieldGrid, FtDirection, GridSpec, ImagingSystem,
                    PupilProfile, coherent_image, convolve2d, convolve_on,
                    fourier_transform_2d, incoherent_image, single_lens_psf,
                    somb)
from ocmsim.errors import GridTooCoarse, SpacingMismatch

from conftest import first_zero_of
from oracles import (coherent_image_quadrature, direct_convolution,
                     j1_first_root_bisect, somb_reference)


# ---------------------------------------------------------------------------
# somb
# ---------------------------------------------------------------------------

def test_somb_at_zero():
    assert somb(0.0) == 1.0


def test_somb_vanishes_at_first_bessel_root():
    root = j1_first_root_bisect()           # independent series + bisection
    assert abs(root - 3.8317059702) < 1e-9
    assert abs(somb(root)) < 1e-9


def test_somb_is_even():
    for x in (0.5, 2.0, 7.0):
        assert somb(-x) == somb(x)


def test_somb_matches_series_reference():
    xs = np.linspace(0.05, 25.0, 113)
    ref = np.array([somb_reference(float(x)) for x in xs])
    np.testing.assert_allclose(somb(xs), ref, atol=1e-12)


# ---------------------------------------------------------------------------
# single-lens PSF
# ---------------------------------------------------------------------------

def test_psf_first_zero_810(reference_system, psf_grid):
    h = single_lens_psf(reference_system, psf_grid)
    assert h.values[256, 256] == 1.0
    fz = first_zero_of(h.x_axis(), h.values[:, 256])
    assert abs(fz - 127.1e-6) < 0.5e-6


def test_psf_first_zero_405(reference_system, psf_grid):
    h = single_lens_psf(reference_system.with_wavelength(405e-9), psf_grid)
    fz = first_zero_of(h.x_axis(), h.values[:, 256])
    assert abs(fz - 63.6e-6) < 0.3e-6


def test_psf_rejects_coarse_grid(reference_system):
    r0 = reference_system.first_zero_radius
    with pytest.raises(GridTooCoarse):
        single_lens_psf(reference_system, GridSpec.centered(64, r0 / 3))


def test_gaussian_pupil_psf_is_gaussian():
    sys_ = ImagingSystem(1.38e-3, 0.355, 810e-9, 2.4,
                         PupilProfile.GAUSSIAN, pupil_sigma=0.5e-3)
    sigma = sys_.psf_sigma
    spec = GridSpec.centered(128, sigma / 6)
    h = single_lens_psf(sys_, spec)
    x = h.x_axis()
    expected = np.exp(-x ** 2 / (2 * sigma ** 2))
    np.testing.assert_allclose(h.values[:, 64], expected, atol=1e-12)


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------

def test_convolution_delta_identity():
    spec = GridSpec.centered(48, 4e-6)
    g = FieldGrid.sample(spec, lambda x, y: np.exp(-(x ** 2 + y ** 2)
                                                   / (2 * (30e-6) ** 2)))
    delta = FieldGrid(np.zeros((48, 48)), 4e-6, 4e-6, spec.origin)
    delta.values[24, 24] = 1.0 / (4e-6 * 4e-6)
    out = convolve_on(g, delta)
    err = np.abs(out.values - g.values).max() / np.abs(g.values).max()
    assert err < 1e-9


def test_convolution_matches_direct_sum():
    rng = np.random.default_rng(11)
    f = FieldGrid(rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16)),
                  1e-6, 1e-6, (-8e-6, -8e-6))
    g = FieldGrid(rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16)),
                  1e-6, 1e-6, (-8e-6, -8e-6))
    out = convolve2d(f, g)
    ref = direct_convolution(f.values, g.values, 1e-6, 1e-6)
    err = np.linalg.norm(out.values - ref) / np.linalg.norm(ref)
    assert err < 1e-10
    assert out.origin == (-16e-6, -16e-6)


def test_convolution_of_gaussians_widens_by_sqrt2():
    sigma = 40e-6
    spec = GridSpec.centered(128, 5e-6)
    g = FieldGrid.sample(spec, lambda x, y: np.exp(-(x ** 2 + y ** 2)
                                                   / (2 * sigma ** 2)))
    out = convolve2d(g, g)
    x = out.x_axis()
    profile = out.values[:, out.ny // 2].real
    # fit the log-parabola for the std
    sel = profile > profile.max() * 1e-3
    coef = np.polyfit(x[sel], np.log(profile[sel]), 2)
    fitted = np.sqrt(-1.0 / (2 * coef[0]))
    assert abs(fitted - sigma * np.sqrt(2)) / (sigma * np.sqrt(2)) < 0.005


def test_convolution_spacing_mismatch():
    f = FieldGrid(np.ones((8, 8)), 1e-6, 1e-6)
    g = FieldGrid(np.ones((8, 8)), 2e-6, 2e-6)
    with pytest.raises(SpacingMismatch):
        convolve2d(f, g)


def test_convolution_commutative_associative():
    rng = np.random.default_rng(12)
    spec = GridSpec.centered(16, 1e-6)
    a, b, c = (FieldGrid.from_spec(spec, rng.normal(size=(16, 16)))
               for _ in range(3))
    ab = convolve2d(a, b)
    ba = convolve2d(b, a)
    assert np.linalg.norm(ab.values - ba.values) / np.linalg.norm(ab.values) < 1e-9
    abc1 = convolve2d(convolve2d(a, b), c)
    abc2 = convolve2d(a, convolve2d(b, c))
    err = np.linalg.norm(abc1.values - abc2.values) / np.linalg.norm(abc1.values)
    assert err < 1e-9


# ---------------------------------------------------------------------------
# imaging
# ---------------------------------------------------------------------------

def test_point_object_image_is_psf_squared(reference_system, psf_grid):
    img = coherent_image(Aperture.point(), reference_system, psf_grid)
    # image axes are object axes scaled by m
    fz = first_zero_of(img.x_axis(), np.sqrt(img.values[:, 256])
                       * np.sign(single_lens_psf(reference_system,
                                                 psf_grid).values[:, 256]))
    assert abs(fz - 2.4 * 127.1e-6) < 2.4 * 0.5e-6


def test_uniform_aperture_gives_flat_interior(reference_system):
    # the coherent edge ringing decays as 1/(k d): the interior must sit far
    # from the plateau boundary for the ripple to drop below 1%
    r0 = reference_system.first_zero_radius
    spec = GridSpec.centered(1024, r0 / 4)
    img = coherent_image(Aperture.uniform(), reference_system, spec)
    n = img.nx
    interior = img.values[n // 2 - 10:n // 2 + 10, n // 2 - 10:n // 2 + 10]
    ripple = (interior.max() - interior.min()) / interior.max()
    assert ripple < 0.01


def test_triple_slit_central_slit_unresolved_at_810(reference_system):
    # 70 um lines; at this pitch the coherent 810 nm image is a single
    # envelope: no interior local minimum below 95% of peak between centers
    pitch = 100e-6
    ap = Aperture.slits(3, 70e-6, pitch, slit_length=300e-6)
    spec = GridSpec.centered(512, 4.5e-6)
    img = coherent_image(ap, reference_system, spec)
    x = img.x_axis()
    band = np.abs(img.y_axis()) <= 100e-6 * 2.4
    prof = img.values[:, band].sum(axis=1)
    lo = np.argmin(np.abs(x + pitch * 2.4))
    hi = np.argmin(np.abs(x - pitch * 2.4))
    seg = prof[lo:hi + 1]
    interior = seg[1:-1]
    local_min = (interior < seg[:-2]) & (interior < seg[2:])
    bad = interior[local_min] < 0.95 * prof.max()
    assert not np.any(bad)


def test_coherent_image_equals_quadrature_oracle(reference_system):
    rng = np.random.default_rng(13)
    spec = GridSpec.centered(32, 12e-6)
    a_vals = rng.random((32, 32))
    ap = Aperture.from_mask(FieldGrid.from_spec(spec, a_vals))
    img = coherent_image(ap, reference_system, spec)
    sys_ = reference_system
    ref = coherent_image_quadrature(
        a_vals, lambda dx, dy: sys_.psf_amplitude(dx, dy),
        spec.x_axis(), spec.y_axis(), img.x_axis(), img.y_axis(),
        spec.dx, spec.dy, sys_.magnification)
    err = np.linalg.norm(img.values - ref) / np.linalg.norm(ref)
    assert err < 1e-8


def test_coherent_image_nonnegative_and_phase_invariant(reference_system):
    rng = np.random.default_rng(14)
    spec = GridSpec.centered(64, 10e-6)
    vals = rng.random((64, 64))
    img1 = coherent_image(Aperture.from_mask(FieldGrid.from_spec(spec, vals)),
                          reference_system, spec)
    img2 = coherent_image(
        Aperture.from_mask(FieldGrid.from_spec(spec, vals * np.exp(0.73j))),
        reference_system, spec)
    assert img1.values.min() >= 0
    np.testing.assert_allclose(img1.values, img2.values, rtol=1e-10)


def test_incoherent_point_and_uniform(reference_system, psf_grid):
    img = incoherent_image(Aperture.point(), reference_system, psf_grid)
    h = single_lens_psf(reference_system, psf_grid)
    expected = np.abs(h.values) ** 2
    scale = img.values[256, 256] / expected[256, 256]
    np.testing.assert_allclose(img.values, scale * expected,
                               atol=1e-9 * img.values.max())

    r0 = reference_system.first_zero_radius
    spec = GridSpec.centered(384, r0 / 4)
    flat = incoherent_image(Aperture.uniform(), reference_system, spec)
    n = flat.nx
    interior = flat.values[n // 2 - 20:n // 2 + 20, n // 2 - 20:n // 2 + 20]
    assert (interior.max() - interior.min()) / interior.max() < 0.01


def test_incoherent_double_slit_has_no_fringes(reference_system):
    # coherent imaging interferes between the slits, incoherent must not:
    # inside the gap the incoherent profile is a monotone valley
    pitch = 550e-6
    ap = Aperture.slits(2, 200e-6, pitch, slit_length=400e-6)
    spec = GridSpec.centered(512, 6e-6)
    inc = incoherent_image(ap, reference_system, spec)
    coh = coherent_image(ap, reference_system, spec)
    x = inc.x_axis()
    band = np.abs(inc.y_axis()) <= 300e-6
    prof_i = inc.values[:, band].sum(axis=1)
    prof_c = coh.values[:, band].sum(axis=1)
    # interior of the gap between the two geometric slit images
    gap_half = (pitch / 2 - 100e-6) * 2.4 * 0.8
    lo = np.argmin(np.abs(x + gap_half))
    hi = np.argmin(np.abs(x - gap_half))

    def count_local_maxima(seg):
        inner = (seg[1:-1] > seg[:-2]) & (seg[1:-1] >= seg[2:])
        return int(inner.sum())

    assert count_local_maxima(prof_i[lo:hi + 1]) == 0      # monotone valley
    assert count_local_maxima(prof_c[lo:hi + 1]) >= 1      # fringes


# ---------------------------------------------------------------------------
# Fourier transform
# ---------------------------------------------------------------------------

def test_ft_of_gaussian():
    sigma = 50e-6
    spec = GridSpec.centered(256, 10e-6)
    g = FieldGrid.sample(spec, lambda x, y: np.exp(-(x ** 2 + y ** 2)
                                                   / (2 * sigma ** 2)))
    ft = fourier_transform_2d(g)
    q = ft.x_axis()
    center = 128
    assert abs(ft.values[center, center] - 2 * np.pi * sigma ** 2) \
        < 1e-9 * 2 * np.pi * sigma ** 2
    profile = np.abs(ft.values[:, center])
    sel = profile > profile.max() * 1e-3
    coef = np.polyfit(q[sel], np.log(profile[sel]), 2)
    fitted = np.sqrt(-1.0 / (2 * coef[0]))
    assert abs(fitted - 1.0 / sigma) * sigma < 1e-6


def test_ft_of_shifted_delta_is_phase_ramp():
    spec = GridSpec.centered(64, 2e-6)
    g = FieldGrid(np.zeros((64, 64), dtype=complex), 2e-6, 2e-6, spec.origin)
    shift = (40e-6, -12e-6)
    ix = int(round((shift[0] - spec.origin[0]) / spec.dx))
    iy = int(round((shift[1] - spec.origin[1]) / spec.dy))
    g.values[ix, iy] = 1.0
    ft = fourier_transform_2d(g)
    mags = np.abs(ft.values) / (2e-6 * 2e-6)
    np.testing.assert_allclose(mags, 1.0, atol=1e-9)
    qx, qy = np.meshgrid(ft.x_axis(), ft.y_axis(), indexing="ij")
    expected = np.exp(-1j * (qx * shift[0] + qy * shift[1])) * (2e-6) ** 2
    np.testing.assert_allclose(ft.values, expected, atol=1e-12)


def test_parseval_identity():
    rng = np.random.default_rng(15)
    spec = GridSpec.centered(32, 3e-6)
    g = FieldGrid.from_spec(spec, rng.normal(size=(32, 32))
                            + 1j * rng.normal(size=(32, 32)))
    ft = fourier_transform_2d(g)
    lhs = np.sum(np.abs(g.values) ** 2) * g.dx * g.dy
    rhs = np.sum(np.abs(ft.values) ** 2) * ft.dx * ft.dy / (2 * np.pi) ** 2
    assert abs(lhs - rhs) / lhs < 1e-10


# ---------------------------------------------------------------------------
# scaling of the first zero
# ---------------------------------------------------------------------------

def test_first_zero_scales_with_wavelength_and_pupil():
    fz = {}
    for lam in (405e-9, 810e-9, 1215e-9):
        sys_ = ImagingSystem(1.38e-3, 0.355, lam, 2.4)
        spec = GridSpec.centered(256, sys_.first_zero_radius / 8)
        h = single_lens_psf(sys_, spec)
        fz[lam] = first_zero_of(h.x_axis(), h.values[:, 128])
    lams = np.array(sorted(fz))
    slope = np.polyfit(np.log(lams), np.log([fz[l] for l in lams]), 1)[0]
    assert abs(slope - 1.0) < 0.01

    fzr = {}
    for R in (0.69e-3, 1.38e-3, 2.76e-3):
        sys_ = ImagingSystem(R, 0.355, 810e-9, 2.4)
        spec = GridSpec.centered(256, sys_.first_zero_radius / 8)
        h = single_lens_psf(sys_, spec)
        fzr[R] = first_zero_of(h.x_axis(), h.values[:, 128])
    rs = np.array(sorted(fzr))
    slope = np.polyfit(np.log(rs), np.log([fzr[r] for r in rs]), 1)[0]
    assert abs(slope + 1.0) < 0.01

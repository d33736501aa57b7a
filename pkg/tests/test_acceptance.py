"""Acceptance suite: one test per criterion, one printed line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines.  The
heavy simulation artifacts are shared through module-scoped fixtures; the
whole suite is sized for a few minutes on a laptop.
"""

import numpy as np
import pytest
from scipy import stats

from ocmsim import (Aperture, ClassicalSource, DetectorConfig,
                    FarFieldPairSource, FieldGrid, GridSpec, ImagingSystem,
                    OcmPairSource, PhaseMatchingParams, PupilProfile, XiMode,
                    analytic_centroid_psf_circular, centroid_image,
                    centroid_psf, classical_centroid_psf, coherent_image,
                    cross_section, deviation_envelope, deviation_envelope_fwhm,
                    estimate_accidentals, extract_coincidences,
                    far_field_pattern, incoherent_image, ocm_image,
                    run_acquisition, scaling_fit, singles_image, slit_contrast,
                    single_lens_psf, wavevector_mismatch, width_metrics)
from ocmsim.cli import main as cli_main

from conftest import first_zero_of, fwhm_of
from oracles import CorrelationQuadrature, direct_convolution, j1_first_root_bisect

SYSTEM = ImagingSystem(1.38e-3, 0.355, 810e-9, 2.4)
SLITS = Aperture.slits(3, 70e-6, 110e-6, slit_length=300e-6)
PITCH_IMG = 110e-6 * 2.4
IDEAL = DetectorConfig(pde=1.0, dark_count_rate=0.0, crosstalk_prob=0.0)


def report(criterion: int, name: str, detail: str, ok: bool) -> None:
    print(f"\nACCEPTANCE {criterion} {name}: {detail} -> "
          f"{'PASS' if ok else 'FAIL'}")
    assert ok, f"criterion {criterion} ({name}): {detail}"


# ---------------------------------------------------------------------------
# shared heavy artifacts
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def hard_pupil_centroid_psfs():
    """Numeric centroid PSFs for N in {1,2,3,4,8} on a wide fine grid."""
    r0 = SYSTEM.first_zero_radius
    spec = GridSpec.centered(2048, r0 / 4)
    h = single_lens_psf(SYSTEM, spec)
    return {n: centroid_psf(h, n) for n in (1, 2, 3, 4, 8)}


@pytest.fixture(scope="module")
def pm_params():
    return PhaseMatchingParams.from_wavelengths(5e-3, 810e-9, 810e-9, 50e-3)


@pytest.fixture(scope="module")
def big_ocm_run(pm_params):
    """1e7 pair acquisition of the triple slit at the reference geometry."""
    src = OcmPairSource(SLITS, SYSTEM, pm_params,
                        pair_rate=1.0 / IDEAL.frame_duration)   # 1 pair/frame
    wall = 1e7 / IDEAL.frame_rate
    return run_acquisition(src, IDEAL, wall, seed=20240810)


# ---------------------------------------------------------------------------
# criterion 1: Heisenberg-limit centroid PSF identity
# ---------------------------------------------------------------------------

def test_criterion_1_heisenberg_psf_identity(hard_pupil_centroid_psfs):
    r0 = SYSTEM.first_zero_radius
    j1_zero = j1_first_root_bisect()
    expected_r0 = j1_zero * SYSTEM.object_distance * SYSTEM.wavelength / (
        2 * np.pi * SYSTEM.pupil_radius)

    # the spectral self-convolution agrees with direct brute-force
    # convolution on a small kernel whose tails vanish inside the grid
    sigma = 1e-4
    small = GridSpec.centered(48, sigma / 2.5)
    hg = FieldGrid.sample(small, lambda x, y: np.exp(-(x ** 2 + y ** 2)
                                                     / (2 * sigma ** 2)))
    via_op = centroid_psf(hg, 2)
    brute = direct_convolution(hg.values, hg.values, hg.dx, hg.dy).real
    c0 = 2 * (small.nx // 2)
    brute_center = 4.0 * brute[c0 - 24:c0 + 24, c0 - 24:c0 + 24]
    assert np.abs(via_op.values - brute_center).max() \
        < 1e-8 * np.abs(brute_center).max()

    worst_shape = 0.0
    worst_zero = 0.0
    for n in (1, 2, 3, 4):
        H = hard_pupil_centroid_psfs[n].peak_normalized()
        ref = analytic_centroid_psf_circular(SYSTEM, n, H.spec)
        X, Y = ref.meshgrid()
        mask = np.hypot(X, Y) <= 4 * r0 / n
        worst_shape = max(worst_shape,
                          float(np.abs(H.values - ref.values)[mask].max()))
        fz = first_zero_of(H.x_axis(), H.values[:, H.ny // 2].real)
        worst_zero = max(worst_zero, abs(fz - expected_r0 / n) / (expected_r0 / n))
    detail = (f"max rel Linf {worst_shape:.2e} (tol 1e-3), "
              f"first zero 127.1um/N max err {worst_zero * 100:.2f}% (tol 2%)")
    report(1, "Heisenberg PSF identity", detail,
           worst_shape < 1e-3 and worst_zero < 0.02)


# ---------------------------------------------------------------------------
# criterion 2: OCM equals half-wavelength coherent imaging
# ---------------------------------------------------------------------------

def test_criterion_2_half_wavelength_equivalence():
    spec = GridSpec.centered(512, 4.5e-6)
    ocm = ocm_image(SLITS, SYSTEM, 2, spec)
    half = coherent_image(SLITS, SYSTEM.with_wavelength(405e-9), spec)
    err = np.linalg.norm(ocm.values - half.values) / np.linalg.norm(half.values)
    report(2, "OCM = half wavelength", f"rel L2 {err:.2e} (tol 1e-9)",
           err < 1e-9)


# ---------------------------------------------------------------------------
# criterion 3: SQL separation and scaling exponents
# ---------------------------------------------------------------------------

def test_criterion_3_sql_separation(hard_pupil_centroid_psfs):
    r0 = SYSTEM.first_zero_radius
    spec = GridSpec.centered(2048, r0 / 8)
    h = single_lens_psf(SYSTEM, spec)
    classical2 = classical_centroid_psf(h, 2)
    f_cl = fwhm_of(classical2.x_axis(), classical2.values.sum(axis=1))
    H2 = analytic_centroid_psf_circular(SYSTEM, 2, classical2.spec)
    f_q = fwhm_of(H2.x_axis(), (np.abs(H2.values) ** 2).sum(axis=1))
    ratio = f_cl / f_q
    ratio_ok = abs(ratio - np.sqrt(2)) < 0.05 * np.sqrt(2)

    # quantum exponent, hard pupil: numeric centroid PSF intensities
    widths_q = []
    for n in (1, 2, 4, 8):
        H = hard_pupil_centroid_psfs[n]
        widths_q.append((n, fwhm_of(H.x_axis(),
                                    np.abs(H.values[:, H.ny // 2]) ** 2)))
    alpha_q = scaling_fit(widths_q).alpha

    # classical exponent (Gaussian PSF, as the central-limit argument needs
    # a finite-variance kernel)
    sigma = 1e-4
    gspec = GridSpec.centered(512, sigma / 16)
    hg = FieldGrid.sample(gspec, lambda x, y: np.exp(-(x ** 2 + y ** 2)
                                                     / (2 * sigma ** 2)))
    widths_c = []
    for n in (1, 2, 4, 8):
        p = classical_centroid_psf(hg, n)
        widths_c.append((n, fwhm_of(p.x_axis(), p.values[:, p.ny // 2])))
    alpha_c = scaling_fit(widths_c).alpha

    # quantum exponent, Gaussian pupil
    gsys = ImagingSystem(1.38e-3, 0.355, 810e-9, 2.4, PupilProfile.GAUSSIAN,
                         pupil_sigma=0.5e-3)
    widths_g = []
    for n in (1, 2, 4, 8):
        s = gsys.psf_sigma / np.sqrt(n)
        sp = GridSpec.centered(256, s / 8)
        H = single_lens_psf(gsys, sp, order=n)
        widths_g.append((n, fwhm_of(H.x_axis(),
                                    np.abs(H.values[:, 128]) ** 2)))
    alpha_g = scaling_fit(widths_g).alpha

    detail = (f"FWHM ratio {ratio:.4f} (sqrt2 +-5%), alpha quantum "
              f"{alpha_q:.3f} (1.00 +-0.03), classical {alpha_c:.3f} "
              f"(0.50 +-0.03), gaussian pupil {alpha_g:.3f} (0.50 +-0.03)")
    report(3, "SQL separation", detail,
           ratio_ok and abs(alpha_q - 1.0) < 0.03
           and abs(alpha_c - 0.5) < 0.03 and abs(alpha_g - 0.5) < 0.03)


# ---------------------------------------------------------------------------
# criterion 4: brute-force correlation quadrature
# ---------------------------------------------------------------------------

def test_criterion_4_quadrature_oracle():
    rng = np.random.default_rng(440)
    nn, s = 16, 20e-6
    sig_h = 1.1 * s
    sig_a = 1.3 * s

    centers = rng.uniform(-1.5 * s, 1.5 * s, size=(3, 2))
    amps = rng.uniform(0.3, 1.0, size=3)

    def aperture_fn(x, y):
        out = np.zeros(np.broadcast(x, y).shape)
        for (cx, cy), a in zip(centers, amps):
            out = out + a * np.exp(-((x - cx) ** 2 + (y - cy) ** 2)
                                   / (2 * sig_a ** 2))
        return out / amps.sum()

    def psf_fn(x, y):
        return np.exp(-(x ** 2 + y ** 2) / (2 * sig_h ** 2))

    # the imaging system whose Gaussian PSF std equals sig_h, at m = 1
    pupil_sigma = 0.355 * 810e-9 / (2 * np.pi * sig_h)
    system = ImagingSystem(1.38e-3, 0.355, 810e-9, 1.0,
                           PupilProfile.GAUSSIAN, pupil_sigma=pupil_sigma)
    assert abs(system.psf_sigma - sig_h) < 1e-12

    quad = CorrelationQuadrature(nn, s, aperture_fn, psf_fn)

    spec = GridSpec.centered(256, s / 4)
    mask = FieldGrid.sample(spec, aperture_fn)
    aperture = Aperture.from_mask(mask)

    worst = {"n2": 0.0, "n3": 0.0, "xi2": 0.0, "xi3": 0.0}

    # N = 2: 5x5 centroid points on the image grid, three xi choices
    img2 = ocm_image(aperture, system, 2, spec)
    offs = [(i * 4, j * 4) for i in range(-2, 3) for j in range(-2, 3)]
    c0 = spec.nx // 2
    route2 = np.array([img2.values[c0 + a, c0 + b] for a, b in offs])
    Xs = [np.array([a * spec.dx, b * spec.dy]) for a, b in offs]
    oracle2 = []
    for xi in (np.zeros(2), np.array([0.4 * s, -0.2 * s]),
               np.array([-0.5 * s, 0.3 * s])):
        o = quad.correlation_n2(Xs, xi)
        oracle2.append(o / np.linalg.norm(o))
        b = route2 / np.linalg.norm(route2)
        worst["n2"] = max(worst["n2"], float(np.linalg.norm(oracle2[-1] - b)))
    for other in oracle2[1:]:
        worst["xi2"] = max(worst["xi2"],
                           float(np.linalg.norm(oracle2[0] - other)))

    # N = 3: 3x3 centroid points, three (xi1, xi2) choices
    img3 = ocm_image(aperture, system, 3, spec)
    offs3 = [(i * 4, j * 4) for i in (-1, 0, 1) for j in (-1, 0, 1)]
    route3 = np.array([img3.values[c0 + a, c0 + b] for a, b in offs3])
    Xs3 = [np.array([a * spec.dx, b * spec.dy]) for a, b in offs3]
    oracle3 = []
    for xi1, xi2 in ((np.zeros(2), np.zeros(2)),
                     (np.array([0.3 * s, 0.1 * s]), np.array([-0.2 * s, 0.2 * s])),
                     (np.array([-0.25 * s, -0.3 * s]), np.array([0.35 * s, -0.1 * s]))):
        o = quad.correlation_n3(Xs3, xi1, xi2)
        oracle3.append(o / np.linalg.norm(o))
        b = route3 / np.linalg.norm(route3)
        worst["n3"] = max(worst["n3"], float(np.linalg.norm(oracle3[-1] - b)))
    for other in oracle3[1:]:
        worst["xi3"] = max(worst["xi3"],
                           float(np.linalg.norm(oracle3[0] - other)))

    detail = (f"rel L2 vs |(A*H)|^2: N=2 {worst['n2']:.1e}, "
              f"N=3 {worst['n3']:.1e}; xi-independence {worst['xi2']:.1e} / "
              f"{worst['xi3']:.1e} (tol 1e-6)")
    report(4, "correlation quadrature", detail, max(worst.values()) < 1e-6)


# ---------------------------------------------------------------------------
# criterion 5: end-to-end statistical reconstruction
# ---------------------------------------------------------------------------

def test_criterion_5_end_to_end_reconstruction(big_ocm_run, pm_params):
    events = big_ocm_run
    pairs = extract_coincidences(events, window=1e-9, min_xi=1)
    accidentals = estimate_accidentals(events, window=1e-9, offset=1, min_xi=1)

    def weight(xi_x, xi_y):
        xi = np.stack([np.asarray(xi_x), np.asarray(xi_y)], axis=-1)
        return np.abs(deviation_envelope(xi, pm_params)) ** 2

    image = centroid_image(pairs, accidentals, XiMode.SUM, IDEAL,
                           deviation_weight=weight)
    assert image.shape == (63, 63)

    # analytic target at the half-pixel bin centers
    spec = GridSpec.centered(640, 110e-6 * 2.4 / 2.4 / 48)   # ~2.3 um object
    analytic = ocm_image(SLITS, SYSTEM, 2, spec)
    bx, by = image.bin_centers()
    pts = np.stack(np.meshgrid(bx, by, indexing="ij"), axis=-1)
    target = analytic.interpolate(pts)

    a = image.values.clip(min=0.0)
    a = a / a.sum()
    b = target / target.sum()
    l1 = float(np.abs(a - b).sum())

    # resolvability ordering across the four illumination modes
    prof = cross_section(image.to_field_grid(), "x")
    contrast_ocm, res_ocm = slit_contrast(prof, 3, PITCH_IMG)

    resolved = {"ocm": res_ocm}
    contrasts = {"ocm": contrast_ocm}
    for name, lam, coherent in (("coh810", 810e-9, True),
                                ("coh405", 405e-9, True),
                                ("inc810", 810e-9, False)):
        src = ClassicalSource(SLITS, SYSTEM.with_wavelength(lam),
                              rate=1.0 / IDEAL.frame_duration,
                              coherent=coherent)
        stream = run_acquisition(src, IDEAL, 1.0, seed=505)
        img = singles_image(stream, IDEAL)
        c, r = slit_contrast(cross_section(img, "x"), 3, PITCH_IMG)
        resolved[name] = r
        contrasts[name] = c

    ordering_ok = (resolved["ocm"] and not resolved["coh810"]
                   and resolved["coh405"] and not resolved["inc810"])
    detail = (f"{len(pairs)} pairs, L1 {l1:.4f} (tol 0.05); resolved: "
              + ", ".join(f"{k}={v} (c={contrasts[k]:.3f})"
                          for k, v in resolved.items()))
    report(5, "end-to-end reconstruction", detail, l1 < 0.05 and ordering_ok)


# ---------------------------------------------------------------------------
# criterion 6: phase matching
# ---------------------------------------------------------------------------

def test_criterion_6_phase_matching(pm_params):
    fwhm = deviation_envelope_fwhm(pm_params)
    dk0 = abs(wavevector_mismatch(np.zeros(2), np.zeros(2), pm_params))
    budget = 1e-6 * 2 * np.pi / pm_params.poling_period
    detail = (f"|sinc|^2 FWHM {fwhm * 1e3:.3f} mm (1.1 +-15%), "
              f"dk(0,0) {dk0:.2e} rad/m (tol {budget:.2e})")
    report(6, "phase matching", detail,
           abs(fwhm - 1.1e-3) < 0.15 * 1.1e-3 and dk0 < budget)


# ---------------------------------------------------------------------------
# criterion 7: detector bookkeeping and accidental subtraction
# ---------------------------------------------------------------------------

def test_criterion_7_detector_bookkeeping():
    cfg = DetectorConfig()
    duty_ok = cfg.duty_cycle == 0.036
    shape_ok = (2 * cfg.n_pixels_x - 1, 2 * cfg.n_pixels_y - 1) == (63, 63)

    # correlations-free stream: hot uncorrelated dark counts, 1e6 frames
    hot = DetectorConfig(pde=1.0, dark_count_rate=5e4, crosstalk_prob=0.0)
    n_frames = 1_000_000
    from ocmsim import apply_detector_model

    events = apply_detector_model(np.empty((0, 2, 2)), hot, 707,
                                  frame_ids=np.empty(0, dtype=np.uint64),
                                  frame_range=(0, n_frames))
    pairs = extract_coincidences(events, window=1e-9, min_xi=1)
    true_img = centroid_image(pairs, cfg=hot)
    acc = estimate_accidentals(events, window=1e-9, offset=1, min_xi=1)
    diff = true_img.values - acc.values
    var = true_img.values + acc.values / 2.0
    keep = (true_img.values + acc.values) > 20
    chi2 = float((diff[keep] ** 2 / var[keep]).sum())
    p = stats.chi2.sf(chi2, int(keep.sum()))
    detail = (f"duty cycle {cfg.duty_cycle} == 0.036: {duty_ok}; 63x63: "
              f"{shape_ok}; accidental chi-square p {p:.3f} (tol > 0.01)")
    report(7, "detector bookkeeping", detail, duty_ok and shape_ok and p > 0.01)


# ---------------------------------------------------------------------------
# criterion 8: far-field de Broglie narrowing
# ---------------------------------------------------------------------------

def test_criterion_8_far_field():
    slit = Aperture.slits(2, 200e-6, 450e-6, slit_length=None)
    spec = GridSpec.centered(512, 4e-6)
    scale810 = SYSTEM.object_distance * 810e-9 / (2 * np.pi)
    scale405 = SYSTEM.object_distance * 405e-9 / (2 * np.pi)
    pat2 = far_field_pattern(slit, 2, scale810, spec)
    pat1 = far_field_pattern(slit, 1, scale405, spec)
    err = float(np.abs(pat2.values - pat1.values).max()
                / np.abs(pat1.values).max())
    axes_ok = pat2.dx == pat1.dx and pat2.origin == pat1.origin

    # simulated joint far-field histogram: diagonal concentration
    src = FarFieldPairSource(slit, scale810, pair_rate=1.0 / IDEAL.frame_duration,
                             correlation_sigma=0.5 * IDEAL.pixel_pitch)
    stream = run_acquisition(src, IDEAL, 1.25, seed=808)
    # the correlation under test lives at small pixel separations, so the
    # crosstalk cut is disabled (crosstalk itself is off in this run)
    pairs = extract_coincidences(stream, window=1e-9, min_xi=0)
    dx = np.abs(pairs.dx)
    frac = float((dx <= 2).mean())
    detail = (f"pattern match rel Linf {err:.1e} (tol 1e-9, axes equal "
              f"{axes_ok}); {len(pairs)} pairs, mass |x1-x2|<=2px "
              f"{frac:.4f} (tol >= 0.90)")
    report(8, "far-field narrowing", detail,
           err < 1e-9 and axes_ok and frac >= 0.90)


# ---------------------------------------------------------------------------
# criterion 9: CLI determinism
# ---------------------------------------------------------------------------

def test_criterion_9_cli_determinism(tmp_path):
    config = str((tmp_path / "cfg.yaml"))
    import shutil
    from pathlib import Path

    shutil.copy(Path(__file__).parent.parent / "configs" / "default.yaml",
                config)
    fast = ["--set", "acquisition.wall_time_s=0.02",
            "--set", "acquisition.pair_rate_hz=4.0e+6",
            "--set", "grid.nx=256"]

    outputs = {}
    for run in ("a", "b"):
        base = tmp_path / run
        for stage, args in (
                ("psf", ["psf"]),
                ("simulate", ["simulate"]),
                ("reconstruct", None),
                ("analyze", None),
                ("compare", ["compare"])):
            out = base / stage
            if stage == "reconstruct":
                args = ["reconstruct", str(base / "simulate" / "events.ocme")]
            if stage == "analyze":
                args = ["analyze",
                        str(base / "reconstruct" / "centroid_image.ocmg")]
            code = cli_main(["--config", config, *fast, "--out", str(out),
                             *args])
            assert code == 0, f"stage {stage} failed"
        files = sorted(p for p in base.rglob("*") if p.is_file())
        outputs[run] = {p.relative_to(base): p.read_bytes() for p in files}

    same_names = set(outputs["a"]) == set(outputs["b"])
    mismatched = [str(k) for k in outputs["a"]
                  if outputs["a"][k] != outputs["b"].get(k)]
    detail = (f"{len(outputs['a'])} files per rerun, byte-identical: "
              f"{not mismatched}" + (f" (differs: {mismatched})"
                                     if mismatched else ""))
    report(9, "CLI determinism", detail, same_names and not mismatched)

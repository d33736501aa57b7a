"""Monte Carlo model of the time-stamping single-photon sensor array.

Photon tuples sampled from a source density are pushed through: detection
efficiency, pixel binning on the active region, per-tuple arrival time
(photons of a tuple share one time bin; true pair correlation times are far
below the bin width), Poissonian dark counts, nearest-neighbor crosstalk, and
first-hit semantics (each pixel timestamps only its earliest event per
frame).

Determinism contract: every public entry point takes a seed; identical
(seed, config, source) produce identical event streams.  Acquisition runs are
split into fixed-size frame blocks with per-block child seeds derived by
hashing (master seed, block index), so the output is independent of any
worker parallelism and reruns are byte-identical.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import UnnormalizableDensity
from .events_io import EventStream, stable_hash, write_events, write_manifest
from .grid import FieldGrid, GridSpec
from .ocm import far_field_pattern, incoherent_ocm_image, ocm_image
from .optics import Aperture, ImagingSystem
from .phasematch import PhaseMatchingParams, deviation_envelope

#: detection efficiency of the reference sensor by wavelength
DEFAULT_PDE = {810e-9: 0.008, 405e-9: 0.05}


@dataclass(frozen=True)
class DetectorConfig:
    """Geometry, timing and noise of the sensor array."""

    n_pixels_x: int = 32
    n_pixels_y: int = 32
    pixel_pitch: float = 43.75e-6          # meters
    time_bin: float = 205e-12              # seconds
    frame_duration: float = 45e-9          # seconds
    frame_rate: float = 800e3              # frames per second
    pde: float = 0.008                     # photon detection efficiency
    dark_count_rate: float | np.ndarray = 1e3   # Hz per pixel (scalar or map)
    crosstalk_prob: float = 0.01           # per nearest neighbor per detection

    def __post_init__(self) -> None:
        if self.n_pixels_x < 1 or self.n_pixels_y < 1:
            raise ValueError("pixel counts must be >= 1")
        for name in ("pixel_pitch", "time_bin", "frame_duration", "frame_rate"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if not 0.0 <= self.pde <= 1.0:
            raise ValueError("pde must be in [0, 1]")
        if not 0.0 <= self.crosstalk_prob <= 1.0:
            raise ValueError("crosstalk_prob must be in [0, 1]")
        if not 0.0 < self.duty_cycle <= 1.0:
            raise ValueError("duty cycle must lie in (0, 1]")
        dark = np.asarray(self.dark_count_rate)
        if dark.ndim not in (0, 2):
            raise ValueError("dark_count_rate is a scalar or a per-pixel map")
        if dark.ndim == 2 and dark.shape != (self.n_pixels_x, self.n_pixels_y):
            raise ValueError("dark count map shape must match the pixel grid")

    @property
    def active_extent(self) -> tuple[float, float]:
        """Physical size of the sensitive region (pitch times pixel count)."""
        return (self.n_pixels_x * self.pixel_pitch,
                self.n_pixels_y * self.pixel_pitch)

    @property
    def duty_cycle(self) -> float:
        return self.frame_duration * self.frame_rate

    @property
    def n_time_bins(self) -> int:
        """Number of representable time bins in a frame (last may be partial)."""
        return int(np.floor(self.frame_duration / self.time_bin)) + 1

    def pixel_index(self, positions: np.ndarray
                    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Map (..., 2) positions (region centered at 0) to pixel indices.

        Returns (ix, iy, inside-mask); indices are meaningless outside.
        """
        ex, ey = self.active_extent
        fx = (positions[..., 0] + ex / 2.0) / self.pixel_pitch
        fy = (positions[..., 1] + ey / 2.0) / self.pixel_pitch
        ix = np.floor(fx).astype(np.int64)
        iy = np.floor(fy).astype(np.int64)
        inside = ((ix >= 0) & (ix < self.n_pixels_x)
                  & (iy >= 0) & (iy < self.n_pixels_y))
        return ix, iy, inside

    def bin_center(self, cx, cy) -> tuple[np.ndarray, np.ndarray]:
        """Physical position of half-pixel centroid bin (cx, cy)."""
        ex, ey = self.active_extent
        x = -ex / 2.0 + (np.asarray(cx) + 1) * self.pixel_pitch / 2.0
        y = -ey / 2.0 + (np.asarray(cy) + 1) * self.pixel_pitch / 2.0
        return x, y

    def to_dict(self) -> dict:
        dark = self.dark_count_rate
        dark = dark.tolist() if isinstance(dark, np.ndarray) else float(dark)
        return {
            "n_pixels_x": self.n_pixels_x, "n_pixels_y": self.n_pixels_y,
            "pixel_pitch": self.pixel_pitch, "time_bin": self.time_bin,
            "frame_duration": self.frame_duration, "frame_rate": self.frame_rate,
            "pde": self.pde, "dark_count_rate": dark,
            "crosstalk_prob": self.crosstalk_prob,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DetectorConfig":
        d = dict(d)
        dark = d.get("dark_count_rate", 1e3)
        if isinstance(dark, list):
            d["dark_count_rate"] = np.asarray(dark)
        return cls(**d)


@dataclass(frozen=True)
class PhotonEvent:
    """One first-hit detection record."""

    frame_id: int
    ix: int
    iy: int
    t_bin: int


# ---------------------------------------------------------------------------
# Sources
# ---------------------------------------------------------------------------

class _DensitySampler:
    """Inverse-CDF sampler over a piecewise-constant 2-D density grid."""

    def __init__(self, grid: FieldGrid):
        weights = np.asarray(grid.values, dtype=float).ravel()
        if not np.all(np.isfinite(weights)) or weights.min() < 0:
            raise UnnormalizableDensity("density must be finite and nonnegative")
        total = weights.sum()
        if total <= 0.0:
            raise UnnormalizableDensity("density has zero total mass")
        self._cdf = np.cumsum(weights)
        self._cdf /= self._cdf[-1]
        self._grid = grid

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        g = self._grid
        idx = np.searchsorted(self._cdf, rng.random(count), side="right")
        ix, iy = idx // g.ny, idx % g.ny
        x = g.origin[0] + ix * g.dx + (rng.random(count) - 0.5) * g.dx
        y = g.origin[1] + iy * g.dy + (rng.random(count) - 0.5) * g.dy
        return np.stack([x, y], axis=-1)


def _sampling_spec(detector: DetectorConfig, system: ImagingSystem,
                   aperture: Aperture, oversample: int) -> GridSpec:
    """Object-plane grid spec whose image covers the sensor with margin."""
    m = system.magnification
    half_img = max(detector.active_extent) / 2.0 + 2 * detector.pixel_pitch
    half_obj = max(half_img / m + 3.0 * system.first_zero_radius,
                   aperture.typical_extent() / 2.0 + 3.0 * system.first_zero_radius)
    dx_obj = detector.pixel_pitch / (oversample * m)
    nx = int(np.ceil(2.0 * half_obj / dx_obj))
    nx += nx % 2
    return GridSpec.centered(nx, dx_obj)


@dataclass(frozen=True)
class OcmPairSource:
    """Entangled N-photon centroid source imaged onto the detector.

    The joint density factorizes into the centroid image (the N-photon
    correlation depends on the centroid only) and the pair-separation
    envelope from phase matching, applied in detector coordinates.
    """

    aperture: Aperture
    system: ImagingSystem
    phase_matching: PhaseMatchingParams
    pair_rate: float                       # mean pairs/s reaching the detector
    n_photons: int = 2
    coherent: bool = True
    oversample: int = 8

    def __post_init__(self) -> None:
        if self.pair_rate <= 0:
            raise ValueError("pair_rate must be > 0")
        if self.n_photons != 2:
            raise ValueError("the event pipeline is specified for photon pairs")

    def describe(self) -> dict:
        return {"kind": "ocm_pairs", "n_photons": self.n_photons,
                "wavelength": self.system.wavelength,
                "pair_rate": self.pair_rate, "coherent": self.coherent}

    def photons_per_event(self) -> int:
        return self.n_photons

    def centroid_density(self, detector: DetectorConfig) -> FieldGrid:
        spec = _sampling_spec(detector, self.system, self.aperture,
                              self.oversample)
        image = ocm_image if self.coherent else incoherent_ocm_image
        return image(self.aperture, self.system, self.n_photons, spec)

    def deviation_density(self, detector: DetectorConfig) -> FieldGrid:
        half = 1.6 * max(detector.active_extent)
        n = 256
        spec = GridSpec.centered(n, 2.0 * half / n)
        X, Y = np.meshgrid(spec.x_axis(), spec.y_axis(), indexing="ij")
        xi = np.stack([X, Y], axis=-1)
        env = deviation_envelope(xi, self.phase_matching)
        return FieldGrid.from_spec(spec, np.abs(env) ** 2)

    def sampler(self, detector: DetectorConfig):
        centroid = _DensitySampler(self.centroid_density(detector))
        deviation = _DensitySampler(self.deviation_density(detector))

        def draw(rng: np.random.Generator, count: int) -> np.ndarray:
            X = centroid.sample(rng, count)
            xi = deviation.sample(rng, count)
            return np.stack([X + xi, X - xi], axis=1)

        return draw


@dataclass(frozen=True)
class ClassicalSource:
    """Classical illumination: independent single photons from an image."""

    aperture: Aperture
    system: ImagingSystem
    rate: float                            # mean detected-plane photons/s
    coherent: bool = True
    oversample: int = 8

    def __post_init__(self) -> None:
        if self.rate <= 0:
            raise ValueError("rate must be > 0")

    def describe(self) -> dict:
        return {"kind": "classical", "coherent": self.coherent,
                "wavelength": self.system.wavelength, "rate": self.rate}

    def photons_per_event(self) -> int:
        return 1

    @property
    def pair_rate(self) -> float:
        return self.rate

    def sampler(self, detector: DetectorConfig):
        spec = _sampling_spec(detector, self.system, self.aperture,
                              self.oversample)
        image = (ocm_image if self.coherent else incoherent_ocm_image)(
            self.aperture, self.system, 1, spec)
        sampler = _DensitySampler(image)

        def draw(rng: np.random.Generator, count: int) -> np.ndarray:
            return sampler.sample(rng, count)[:, None, :]

        return draw


@dataclass(frozen=True)
class PointSource:
    """Gaussian calibration spot of given waist radius (single photons)."""

    waist: float                           # 1/e amplitude radius, meters
    rate: float

    def describe(self) -> dict:
        return {"kind": "point", "waist": self.waist, "rate": self.rate}

    def photons_per_event(self) -> int:
        return 1

    @property
    def pair_rate(self) -> float:
        return self.rate

    def sampler(self, detector: DetectorConfig):
        sigma = self.waist / 2.0           # intensity std of exp(-2 r^2 / w^2)

        def draw(rng: np.random.Generator, count: int) -> np.ndarray:
            return rng.normal(0.0, sigma, size=(count, 1, 2))

        return draw


@dataclass(frozen=True)
class FarFieldPairSource:
    """Pair source in the far-field configuration: both photons share a mode.

    The common position is drawn from the N-fold narrowed diffraction pattern
    of the aperture; each photon then receives an independent Gaussian jitter
    of ``correlation_sigma`` (sub-pixel by default) standing in for the
    residual phase-matching correlation width.
    """

    aperture: Aperture
    scale: float                           # position per wavevector, s_o*lambda/2pi
    pair_rate: float
    n_photons: int = 2
    correlation_sigma: float = 0.5 * 43.75e-6
    oversample: int = 8

    def describe(self) -> dict:
        return {"kind": "far_field_pairs", "n_photons": self.n_photons,
                "scale": self.scale, "pair_rate": self.pair_rate,
                "correlation_sigma": self.correlation_sigma}

    def photons_per_event(self) -> int:
        return self.n_photons

    def pattern(self, detector: DetectorConfig) -> FieldGrid:
        # choose the aperture grid so the mapped pattern oversamples the pitch
        extent = max(self.aperture.typical_extent(), 1e-4)
        want_dx_out = detector.pixel_pitch / self.oversample
        # output spacing = (2 pi / (n dx_obj)) * scale / n_photons
        n = 512
        dx_obj = 2.0 * np.pi * self.scale / (self.n_photons * want_dx_out * n)
        if n * dx_obj < 4 * extent:      # keep the aperture well inside
            n = int(np.ceil(4 * extent / dx_obj))
            n += n % 2
        spec = GridSpec.centered(n, dx_obj)
        pattern = far_field_pattern(self.aperture, self.n_photons, self.scale, spec)
        # restrict to the sensor neighborhood to keep the CDF small
        half = max(detector.active_extent) / 2.0 + 4 * detector.pixel_pitch
        ax = pattern.x_axis()
        keep = np.abs(ax) <= half
        if keep.sum() >= 8:
            i0, i1 = np.flatnonzero(keep)[[0, -1]]
            pattern = FieldGrid(pattern.values[i0:i1 + 1, i0:i1 + 1],
                                pattern.dx, pattern.dy,
                                (ax[i0], pattern.y_axis()[i0]))
        return pattern

    def sampler(self, detector: DetectorConfig):
        sampler = _DensitySampler(self.pattern(detector))
        n_ph = self.n_photons
        sigma = self.correlation_sigma

        def draw(rng: np.random.Generator, count: int) -> np.ndarray:
            common = sampler.sample(rng, count)
            tuples = np.repeat(common[:, None, :], n_ph, axis=1)
            if sigma > 0:
                tuples = tuples + rng.normal(0.0, sigma, size=tuples.shape)
            return tuples

        return draw


# ---------------------------------------------------------------------------
# Sampling and detection
# ---------------------------------------------------------------------------

def sample_event_positions(source, rng_seed: int, count: int,
                           detector: DetectorConfig | None = None) -> np.ndarray:
    """Draw ``count`` i.i.d. photon tuples, shape (count, N, 2), image plane.

    Deterministic for a fixed seed; densities are discretized on fine grids
    and sampled by inverse CDF with uniform in-cell jitter.
    """
    detector = detector or DetectorConfig()
    rng = np.random.default_rng(rng_seed)
    return source.sampler(detector)(rng, count)


def _detect(positions: np.ndarray, cfg: DetectorConfig,
            rng: np.random.Generator, frame_ids: np.ndarray | None,
            frame_range: tuple[int, int] | None) -> EventStream:
    """Vectorized detector model; see apply_detector_model."""
    positions = np.asarray(positions, dtype=float)
    if positions.ndim == 2:
        positions = positions[:, None, :]
    n_tuples, n_ph = positions.shape[0], positions.shape[1]
    if frame_ids is None:
        frame_ids = np.arange(n_tuples, dtype=np.uint64)
    else:
        frame_ids = np.asarray(frame_ids, dtype=np.uint64)
    if frame_range is None:
        first = 0 if frame_ids.size == 0 else int(frame_ids.min())
        last = n_tuples if frame_ids.size == 0 else int(frame_ids.max()) + 1
        frame_range = (first, max(last, first + 1))
    n_frames = frame_range[1] - frame_range[0]

    # one arrival time bin per tuple (pair photons are simultaneous)
    tuple_tbin = np.floor(rng.random(n_tuples) * cfg.frame_duration
                          / cfg.time_bin).astype(np.uint16)

    # Bernoulli detection efficiency per photon
    survive = rng.random((n_tuples, n_ph)) < cfg.pde

    ix, iy, inside = cfg.pixel_index(positions)
    keep = survive & inside
    ph_frame = np.repeat(frame_ids, n_ph).reshape(n_tuples, n_ph)[keep]
    ph_tbin = np.repeat(tuple_tbin, n_ph).reshape(n_tuples, n_ph)[keep]
    ph_ix = ix[keep]
    ph_iy = iy[keep]

    # dark counts: Poisson per (pixel, frame), sampled sparsely
    dark = np.asarray(cfg.dark_count_rate, dtype=float)
    mean_per_px = dark * cfg.frame_duration
    total_mean = float(mean_per_px.sum() if dark.ndim else
                       mean_per_px * cfg.n_pixels_x * cfg.n_pixels_y) * n_frames
    n_dark = rng.poisson(total_mean) if total_mean > 0 else 0
    if n_dark > 0:
        d_frame = (rng.integers(0, n_frames, n_dark).astype(np.uint64)
                   + frame_range[0])
        if dark.ndim == 2:
            flat = dark.ravel() / dark.sum()
            cell = np.searchsorted(np.cumsum(flat), rng.random(n_dark),
                                   side="right")
        else:
            cell = rng.integers(0, cfg.n_pixels_x * cfg.n_pixels_y, n_dark)
        d_ix = cell // cfg.n_pixels_y
        d_iy = cell % cfg.n_pixels_y
        d_tbin = np.floor(rng.random(n_dark) * cfg.frame_duration
                          / cfg.time_bin).astype(np.uint16)
        ph_frame = np.concatenate([ph_frame, d_frame])
        ph_ix = np.concatenate([ph_ix, d_ix.astype(np.int64)])
        ph_iy = np.concatenate([ph_iy, d_iy.astype(np.int64)])
        ph_tbin = np.concatenate([ph_tbin, d_tbin])

    # crosstalk: every detection may trigger each 4-neighbor once, same bin
    if cfg.crosstalk_prob > 0 and ph_frame.size:
        n_det = ph_frame.size
        extra = []
        for ddx, ddy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            fired = rng.random(n_det) < cfg.crosstalk_prob
            nx_ = ph_ix[fired] + ddx
            ny_ = ph_iy[fired] + ddy
            ok = ((nx_ >= 0) & (nx_ < cfg.n_pixels_x)
                  & (ny_ >= 0) & (ny_ < cfg.n_pixels_y))
            extra.append((ph_frame[fired][ok], nx_[ok], ny_[ok],
                          ph_tbin[fired][ok]))
        ph_frame = np.concatenate([ph_frame] + [e[0] for e in extra])
        ph_ix = np.concatenate([ph_ix] + [e[1] for e in extra])
        ph_iy = np.concatenate([ph_iy] + [e[2] for e in extra])
        ph_tbin = np.concatenate([ph_tbin] + [e[3] for e in extra])

    # first-hit: keep the earliest event per (frame, pixel)
    if ph_frame.size:
        order = np.lexsort((ph_tbin, ph_iy, ph_ix, ph_frame))
        ph_frame, ph_ix, ph_iy, ph_tbin = (a[order] for a in
                                           (ph_frame, ph_ix, ph_iy, ph_tbin))
        new = np.r_[True, (np.diff(ph_frame.astype(np.int64)) != 0)
                    | (np.diff(ph_ix) != 0) | (np.diff(ph_iy) != 0)]
        ph_frame, ph_ix, ph_iy, ph_tbin = (a[new] for a in
                                           (ph_frame, ph_ix, ph_iy, ph_tbin))
        # final stream order: (frame, t_bin, ix, iy)
        order = np.lexsort((ph_iy, ph_ix, ph_tbin, ph_frame))
        ph_frame, ph_ix, ph_iy, ph_tbin = (a[order] for a in
                                           (ph_frame, ph_ix, ph_iy, ph_tbin))

    return EventStream(
        frame=ph_frame.astype(np.uint64), ix=ph_ix.astype(np.uint16),
        iy=ph_iy.astype(np.uint16), t_bin=ph_tbin.astype(np.uint16),
        n_frames=n_frames, detector=cfg.to_dict())


def apply_detector_model(positions, cfg: DetectorConfig, rng_seed: int,
                         frame_ids=None, frame_range=None) -> EventStream:
    """Detect photon tuples: efficiency, binning, darks, crosstalk, first-hit.

    ``positions`` has shape (n_tuples, N, 2); by default tuple i lands in
    frame i.  Events come back sorted by (frame_id, t_bin).
    """
    rng = np.random.default_rng(rng_seed)
    return _detect(positions, cfg, rng, frame_ids, frame_range)


# ---------------------------------------------------------------------------
# Acquisition
# ---------------------------------------------------------------------------

_BLOCK_FRAMES = 1 << 16


def _child_seed(master_seed: int, block_index: int) -> int:
    digest = hashlib.sha256(
        f"{master_seed}:{block_index}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def run_acquisition(source, cfg: DetectorConfig, wall_time: float,
                    seed: int, out_path=None, manifest_path=None,
                    n_threads: int = 1) -> EventStream:
    """Simulate an acquisition of ``wall_time`` seconds of frames.

    The number of frames equals wall_time * frame_rate.  When ``out_path`` is
    given, the event stream is written in the OCME format together with a
    manifest recording seed, configuration hash, source description and
    counters.  Frame blocks carry hash-derived child seeds and are merged in
    block order, so the result does not depend on ``n_threads`` and reruns
    with the same inputs are byte-identical.
    """
    n_frames = int(round(wall_time * cfg.frame_rate))
    if n_frames < 1:
        raise ValueError("wall_time too short for a single frame")
    mean_pairs = source.pair_rate * cfg.frame_duration
    draw = source.sampler(cfg)

    def run_block(block: int) -> tuple[EventStream, int]:
        start = block * _BLOCK_FRAMES
        stop = min(start + _BLOCK_FRAMES, n_frames)
        rng = np.random.default_rng(_child_seed(seed, block))
        counts = rng.poisson(mean_pairs, stop - start)
        total = int(counts.sum())
        positions = (draw(rng, total) if total else
                     np.empty((0, source.photons_per_event(), 2)))
        frame_ids = start + np.repeat(np.arange(stop - start, dtype=np.uint64),
                                      counts)
        return _detect(positions, cfg, rng, frame_ids, (start, stop)), total

    n_blocks = (n_frames + _BLOCK_FRAMES - 1) // _BLOCK_FRAMES
    if n_threads > 1 and n_blocks > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            results = list(pool.map(run_block, range(n_blocks)))
    else:
        results = [run_block(b) for b in range(n_blocks)]
    parts = [r[0] for r in results]
    generated = sum(r[1] for r in results)

    stream = EventStream(
        frame=np.concatenate([p.frame for p in parts]),
        ix=np.concatenate([p.ix for p in parts]),
        iy=np.concatenate([p.iy for p in parts]),
        t_bin=np.concatenate([p.t_bin for p in parts]),
        n_frames=n_frames, detector=cfg.to_dict(),
        source_hash=stable_hash(source.describe()),
        meta={"seed": int(seed), "wall_time": wall_time,
              "pairs_generated": generated})

    if out_path is not None:
        write_events(out_path, stream)
        manifest_path = manifest_path or str(out_path) + ".manifest.txt"
        write_manifest(manifest_path, {
            "seed": seed,
            "wall_time_s": wall_time,
            "n_frames": n_frames,
            "duty_cycle": cfg.duty_cycle,
            "config_hash": stable_hash(cfg.to_dict()),
            "source": source.describe(),
            "source_hash": stream.source_hash,
            "pairs_generated": generated,
            "events_written": len(stream),
        })
    return stream

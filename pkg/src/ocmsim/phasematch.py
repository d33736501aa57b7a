"""Quasi-phase-matched SPDC: wavevector mismatch and the biphoton amplitude.

The pair source is a periodically poled crystal pumped at omega_p; energy
conservation fixes omega_p = omega_s + omega_i.  Collinear emission is
phase-matched by choosing the poling period G so that the longitudinal
mismatch vanishes at q = 0; off-axis emission is weighted by
sinc(Delta_k L / 2), which restricts the otherwise unbounded photon
separation in the source output plane.

Refractive-index dispersion is a data-file input (ppKTP z-axis shipped, see
``data/ppktp_z.yaml`` for the functional form and literature sources); the
crystal temperature enters through the thermal correction polynomials.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import yaml

from .errors import EvanescentInput
from .optics import Aperture

SPEED_OF_LIGHT = 299792458.0


@dataclass(frozen=True)
class SellmeierModel:
    """Dispersion n(omega) with quadratic thermal correction."""

    coefficients: dict
    n1_thermal: tuple
    n2_thermal: tuple
    reference_temperature_c: float = 25.0
    temperature_c: float = 25.0
    material: str = "custom"

    @classmethod
    def from_file(cls, path=None, temperature_c: float = 25.0) -> "SellmeierModel":
        """Load from a YAML data file; defaults to the shipped ppKTP z-axis."""
        if path is None:
            src = resources.files("ocmsim.data").joinpath("ppktp_z.yaml")
            raw = yaml.safe_load(src.read_text())
        else:
            with open(path) as fh:
                raw = yaml.safe_load(fh)
        th = raw.get("thermal", {})
        return cls(coefficients=dict(raw["sellmeier"]),
                   n1_thermal=tuple(th.get("n1", (0.0,))),
                   n2_thermal=tuple(th.get("n2", (0.0,))),
                   reference_temperature_c=float(
                       th.get("reference_temperature_C", 25.0)),
                   temperature_c=float(temperature_c),
                   material=str(raw.get("material", "custom")))

    def index_at_wavelength(self, wavelength_m):
        u = np.asarray(wavelength_m, dtype=float) * 1e6
        c = self.coefficients
        n_sq = (c["A"] + c["B"] / (1.0 - c["C"] / u ** 2)
                + c["D"] / (1.0 - c["E"] / u ** 2) - c["F"] * u ** 2)
        n = np.sqrt(n_sq)
        dt = self.temperature_c - self.reference_temperature_c
        if dt != 0.0:
            n = n + dt * sum(a / u ** k for k, a in enumerate(self.n1_thermal))
            n = n + dt ** 2 * sum(b / u ** k for k, b in enumerate(self.n2_thermal))
        return n

    def __call__(self, omega):
        """Refractive index at angular frequency omega (rad/s)."""
        return self.index_at_wavelength(2.0 * np.pi * SPEED_OF_LIGHT
                                        / np.asarray(omega, dtype=float))


@dataclass(frozen=True)
class PhaseMatchingParams:
    """Crystal and state-preparation geometry for the pair source."""

    crystal_length: float        # L, meters
    poling_period: float         # G, meters
    omega_s: float               # signal angular frequency, rad/s
    omega_i: float               # idler angular frequency, rad/s
    focal_length: float          # f of the preparation lenses, meters
    index_model: SellmeierModel = field(default_factory=SellmeierModel.from_file)

    def __post_init__(self) -> None:
        if self.crystal_length <= 0 or self.poling_period <= 0:
            raise ValueError("crystal length and poling period must be > 0")
        if self.focal_length <= 0:
            raise ValueError("focal length must be > 0")

    @property
    def omega_p(self) -> float:
        """Pump frequency from energy conservation (never stored)."""
        return self.omega_s + self.omega_i

    @property
    def lambda_s(self) -> float:
        return 2.0 * np.pi * SPEED_OF_LIGHT / self.omega_s

    @property
    def lambda_i(self) -> float:
        return 2.0 * np.pi * SPEED_OF_LIGHT / self.omega_i

    @property
    def degenerate(self) -> bool:
        return self.omega_s == self.omega_i

    @classmethod
    def from_wavelengths(cls, crystal_length: float, lambda_s: float,
                         lambda_i: float, focal_length: float,
                         poling_period: float | None = None,
                         index_model: SellmeierModel | None = None,
                         ) -> "PhaseMatchingParams":
        """Build from vacuum wavelengths; poling period solved when omitted."""
        index_model = index_model or SellmeierModel.from_file()
        omega_s = 2.0 * np.pi * SPEED_OF_LIGHT / lambda_s
        omega_i = 2.0 * np.pi * SPEED_OF_LIGHT / lambda_i
        if poling_period is None:
            poling_period = solve_poling_period(omega_s, omega_i, index_model)
        return cls(crystal_length, poling_period, omega_s, omega_i,
                   focal_length, index_model)


def _longitudinal_k(omega, n, q_sq):
    """sqrt((omega n / c)^2 - q^2) with paraxial-validity check."""
    radicand = (omega * n / SPEED_OF_LIGHT) ** 2 - q_sq
    if np.any(radicand <= 0):
        raise EvanescentInput("transverse wavevector exceeds the medium cone")
    return np.sqrt(radicand)


def solve_poling_period(omega_s: float, omega_i: float,
                        index_model: SellmeierModel) -> float:
    """Poling period G giving Delta_k = 0 for collinear emission (q = 0)."""
    n = index_model
    k_s = omega_s * n(omega_s) / SPEED_OF_LIGHT
    k_i = omega_i * n(omega_i) / SPEED_OF_LIGHT
    omega_p = omega_s + omega_i
    k_p = omega_p * n(omega_p) / SPEED_OF_LIGHT
    residual = k_p - k_s - k_i
    if residual <= 0:
        raise ValueError("no positive poling period: k_p <= k_s + k_i")
    return float(2.0 * np.pi / residual)


def wavevector_mismatch(q_s, q_i, params: PhaseMatchingParams):
    """Longitudinal wavevector mismatch Delta_k(q_s, q_i) in rad/m.

    ``q_s``/``q_i`` are transverse wavevectors, shape (..., 2).  Raises
    EvanescentInput when a photon's transverse momentum leaves the paraxial
    (propagating) domain.
    """
    q_s = np.asarray(q_s, dtype=float)
    q_i = np.asarray(q_i, dtype=float)
    n = params.index_model
    omega_s, omega_i = params.omega_s, params.omega_i
    omega_p = params.omega_p
    k_sz = _longitudinal_k(omega_s, n(omega_s), (q_s ** 2).sum(axis=-1))
    k_iz = _longitudinal_k(omega_i, n(omega_i), (q_i ** 2).sum(axis=-1))
    k_pz = _longitudinal_k(omega_p, n(omega_p), ((q_s + q_i) ** 2).sum(axis=-1))
    return k_sz + k_iz - k_pz + 2.0 * np.pi / params.poling_period


def _sinc(x):
    """sin(x)/x with sinc(0) = 1 (unnormalized convention)."""
    return np.sinc(np.asarray(x, dtype=float) / np.pi)


def biphoton_amplitude(rho_1, rho_2, aperture: Aperture,
                       params: PhaseMatchingParams):
    """Thick-crystal biphoton amplitude at source output positions rho_1, rho_2.

    A(-(w_s rho_1 + w_i rho_2)/(w_s + w_i)) * sinc(Delta_k L / 2), with the
    transverse wavevectors q_k = (omega_k / c f) rho_k of the preparation
    far field.  The frequency-weighted centroid reduces to -(rho_1+rho_2)/2
    in degenerate operation.
    """
    rho_1 = np.asarray(rho_1, dtype=float)
    rho_2 = np.asarray(rho_2, dtype=float)
    cf = SPEED_OF_LIGHT * params.focal_length
    q_s = params.omega_s / cf * rho_1
    q_i = params.omega_i / cf * rho_2
    dk = wavevector_mismatch(q_s, q_i, params)
    centroid = -(params.omega_s * rho_1 + params.omega_i * rho_2) / params.omega_p
    a_val = aperture.amplitude(centroid[..., 0], centroid[..., 1])
    return a_val * _sinc(dk * params.crystal_length / 2.0)


def deviation_envelope(xi, params: PhaseMatchingParams):
    """Pair-separation amplitude sinc(Delta_k L/2) at centroid zero.

    ``xi`` is the photon deviation xi_1 = (rho_1 - rho_2)/2, shape (..., 2);
    photons sit at +-xi.  This is the envelope that bounds the sampled
    deviations of a pair source and the one whose squared modulus has the
    ~1.1 mm FWHM for the reference crystal.
    """
    xi = np.asarray(xi, dtype=float)
    cf = SPEED_OF_LIGHT * params.focal_length
    q = params.omega_s / cf * xi
    dk = wavevector_mismatch(q, -q, params)
    return _sinc(dk * params.crystal_length / 2.0)


def deviation_envelope_fwhm(params: PhaseMatchingParams,
                            max_radius: float = 5e-3,
                            samples: int = 20001) -> float:
    """FWHM of |deviation_envelope|^2 along a radial cut, by bisection-free
    linear interpolation on a dense grid."""
    r = np.linspace(0.0, max_radius, samples)
    xi = np.stack([r, np.zeros_like(r)], axis=-1)
    env = deviation_envelope(xi, params) ** 2
    below = np.where(env < 0.5)[0]
    if below.size == 0:
        raise ValueError("envelope does not fall below half maximum in range")
    j = below[0]
    frac = (0.5 - env[j - 1]) / (env[j] - env[j - 1])
    return 2.0 * (r[j - 1] + frac * (r[j] - r[j - 1]))

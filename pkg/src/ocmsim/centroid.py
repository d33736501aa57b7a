"""Centroid/deviation coordinates for N-photon position tuples.

For photon positions rho_1..rho_N the centroid is X = (1/N) sum rho_k and the
deviations are xi_k = rho_k - X.  Since sum xi_k = 0, the tuple
(X, xi_1, .., xi_{N-1}) is a complete coordinate system; the volume factor of
the change of variables is N^2 (N per transverse axis).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput


@dataclass(frozen=True)
class CentroidTuple:
    """N photon positions with their centroid and independent deviations.

    Both representations are stored, which keeps the coordinate round trip
    bit-exact; a tuple built from coordinates alone reconstructs positions
    as centroid + deviation (with the implied last deviation).
    """

    positions: np.ndarray      # (N, 2) meters
    centroid: np.ndarray       # (2,) meters
    deviations: np.ndarray     # (N-1, 2) meters, xi_1..xi_{N-1}

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def last_deviation(self) -> np.ndarray:
        """Implied xi_N = -sum of the stored deviations."""
        if self.deviations.shape[0] == 0:
            return np.zeros(2)
        return -self.deviations.sum(axis=0)

    @classmethod
    def from_coordinates(cls, centroid, deviations) -> "CentroidTuple":
        centroid = np.asarray(centroid, dtype=float)
        deviations = np.atleast_2d(np.asarray(deviations, dtype=float))
        n = deviations.shape[0] + 1
        positions = np.empty((n, 2))
        positions[:-1] = centroid + deviations
        positions[-1] = centroid - deviations.sum(axis=0)
        return cls(positions, centroid, deviations)


def to_centroid_coords(positions) -> CentroidTuple:
    """Change photon positions to (centroid, deviations)."""
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    if positions.size == 0:
        raise EmptyInput("need at least one photon position")
    if positions.shape[1] != 2:
        raise ValueError("positions must be (N, 2)")
    centroid = positions.mean(axis=0)
    deviations = positions[:-1] - centroid
    return CentroidTuple(positions.copy(), centroid, deviations)


def from_centroid_coords(tup: CentroidTuple) -> np.ndarray:
    """Recover the photon positions (exact: the tuple stores them)."""
    return tup.positions.copy()


def jacobian(n: int) -> int:
    """Volume factor |det J| = N^2 of the coordinate change (both axes)."""
    if n < 1:
        raise EmptyInput("photon number must be >= 1")
    return n * n

#!/bin/env python3

import logging
from typing import Dict, Tuple

import numpy as np

from .errors import DimensionError

_logger = logging.getLogger(__name__)

#gapless points of the two-band model
CRITICAL_ALPHAS = (-2.0, 0.0, 2.0)
NEAR_GAPLESS_TOL = 1e-6


class LatticeSpec:
    """
    Periodic L x L square lattice with two orbitals per unit cell.

    Cell (x, y) has site index x + L*y and orbital mu sits at flat mode index
    2*(x + L*y) + mu.
    """
    ORBITALS_PER_CELL = 2

    def __init__(self, L: int):
        if L < 2:
            raise ValueError(f"lattice size must be at least 2, got {L}")
        self._L = int(L)

    @property
    def L(self) -> int:
        return self._L

    @property
    def n_cells(self) -> int:
        return self._L * self._L

    @property
    def n_modes(self) -> int:
        return self.ORBITALS_PER_CELL * self.n_cells

    def site_index(self, x: int, y: int) -> int:
        return (x % self._L) + self._L * (y % self._L)

    def site_coords(self, site: int) -> Tuple[int, int]:
        if not 0 <= site < self.n_cells:
            raise DimensionError(f"site {site} out of range for {self.n_cells} cells")
        return site % self._L, site // self._L

    def mode_index(self, x: int, y: int, mu: int) -> int:
        if mu not in (0, 1):
            raise DimensionError(f"orbital index must be 0 or 1, got {mu}")
        return self.ORBITALS_PER_CELL * self.site_index(x, y) + mu

    def mode_coords(self, index: int) -> Tuple[int, int, int]:
        if not 0 <= index < self.n_modes:
            raise DimensionError(f"mode {index} out of range for {self.n_modes} modes")
        x, y = self.site_coords(index // self.ORBITALS_PER_CELL)
        return x, y, index % self.ORBITALS_PER_CELL

    def wrap(self, d):
        """Minimal periodic displacement in [-L//2, L - L//2)."""
        return ((np.asarray(d) + self._L // 2) % self._L) - self._L // 2

    def site_grid(self) -> Tuple[np.ndarray, np.ndarray]:
        """x and y coordinates of every cell in site-index order."""
        sites = np.arange(self.n_cells)
        return sites % self._L, sites // self._L

    def momenta(self) -> Tuple[np.ndarray, np.ndarray]:
        """Momentum grid k = 2 pi (m, n)/L with 'ij' indexing."""
        k = 2.0 * np.pi * np.fft.fftfreq(self._L)
        return np.meshgrid(k, k, indexing="ij")

    def modes_of_columns(self, columns) -> np.ndarray:
        """Flat mode indices of every cell whose x coordinate is in `columns`."""
        columns = np.asarray(list(columns), dtype=np.intp) % self._L
        xs, ys = np.meshgrid(columns, np.arange(self._L), indexing="ij")
        sites = (xs + self._L * ys).ravel()
        return np.sort(np.concatenate([2 * sites, 2 * sites + 1]))

    def __eq__(self, other) -> bool:
        return isinstance(other, LatticeSpec) and other._L == self._L

    def __hash__(self) -> int:
        return hash(("LatticeSpec", self._L))

    def __repr__(self) -> str:
        return f"LatticeSpec(L={self._L})"


class AlphaField:
    """
    Per-cell mass parameter alpha, stored as values[x, y].
    """
    def __init__(self, lattice: LatticeSpec, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.shape != (lattice.L, lattice.L):
            raise DimensionError(f"expected alpha field of shape {(lattice.L, lattice.L)}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("alpha field has non-finite entries")
        self._lattice = lattice
        self._values = values

    @classmethod
    def uniform(cls, lattice: LatticeSpec, alpha: float) -> "AlphaField":
        return cls(lattice, np.full((lattice.L, lattice.L), float(alpha)))

    @classmethod
    def domain_wall(cls, lattice: LatticeSpec, alpha_in: float, alpha_out: float,
                    half_width: int=None) -> "AlphaField":
        """
        Slab of alpha_in around x = L/2 in a background of alpha_out. Under
        periodic boundaries this produces two walls parallel to y.
        """
        if half_width is None:
            half_width = default_half_width(lattice)
        values = np.full((lattice.L, lattice.L), float(alpha_out))
        values[slab_columns(lattice, half_width), :] = float(alpha_in)
        return cls(lattice, values)

    @property
    def lattice(self) -> LatticeSpec:
        return self._lattice

    @property
    def values(self) -> np.ndarray:
        return self._values

    def at(self, x: int, y: int) -> float:
        L = self._lattice.L
        return float(self._values[x % L, y % L])

    def is_uniform(self) -> bool:
        return bool(np.all(self._values == self._values.flat[0]))

    def distinct_values(self) -> np.ndarray:
        return np.unique(self._values)

    def gap_distance(self) -> float:
        """Smallest distance of any entry to a gapless alpha."""
        return float(min(np.min(np.abs(self._values - a)) for a in CRITICAL_ALPHAS))


def default_half_width(lattice: LatticeSpec) -> int:
    return max(1, lattice.L // 4)


def slab_columns(lattice: LatticeSpec, half_width: int) -> np.ndarray:
    center = lattice.L // 2
    return np.arange(center - half_width, center + half_width) % lattice.L


def domain_wall_strips(lattice: LatticeSpec, half_width: int=None) -> Dict[str, np.ndarray]:
    """
    Column sets for the domain-wall geometry: 'inside' and 'outside' bulk
    columns and 'walls', the two columns on either side of each interface.
    """
    if half_width is None:
        half_width = default_half_width(lattice)
    L = lattice.L
    inside = slab_columns(lattice, half_width)
    left = inside[0]
    right = (inside[-1] + 1) % L
    walls = np.unique(np.array([left - 1, left, right - 1, right]) % L)
    outside = np.setdiff1d(np.arange(L), inside)
    return {
        "inside": np.setdiff1d(inside, walls),
        "outside": np.setdiff1d(outside, walls),
        "walls": walls,
    }


def is_near_gapless(alpha: float) -> bool:
    return any(abs(alpha - a) < NEAR_GAPLESS_TOL for a in CRITICAL_ALPHAS)

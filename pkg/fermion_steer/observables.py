#!/bin/env python3
"""
Diagnostics computed from correlation matrices of the physical layer.

Every function accepts either a CorrelationMatrix or a plain complex array.
"""

import logging
from typing import Dict, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import stats
from scipy.special import xlogy

from .chern_model import Band, Orbital, OWModeSet
from .errors import DimensionError, GapClosedError
from .gaussian import CorrelationMatrix
from .lattice import LatticeSpec

_logger = logging.getLogger(__name__)

IMAG_TOL = 1e-8
REGULARIZE_TOL = 1e-9
MARKER_MARGIN = 2

MatrixLike = Union[CorrelationMatrix, np.ndarray]


def _as_array(G: MatrixLike) -> np.ndarray:
    if isinstance(G, CorrelationMatrix):
        return G.data
    G = np.asarray(G, dtype=np.complex128)
    assert G.ndim == 2 and G.shape[0] == G.shape[1]
    return G


def _check_physical(G: np.ndarray, lattice: LatticeSpec) -> None:
    if G.shape[0] != lattice.n_modes:
        raise DimensionError(f"expected a {lattice.n_modes}-mode physical correlation matrix, got {G.shape[0]}")


def site_modes(sites) -> np.ndarray:
    sites = np.asarray(sites, dtype=np.intp)
    return np.sort(np.concatenate([2 * sites, 2 * sites + 1]))


class TripleRegionPartition:
    """
    Three 120 degree wedges A, B, C (counterclockwise) of the disk of radius
    `radius` around `center`. Wedge boundaries are half-open in the polar
    angle taken in [0, 2 pi).
    """
    def __init__(self, lattice: LatticeSpec, center: Tuple[int, int]=None, radius: float=None):
        if center is None:
            center = (lattice.L // 2, lattice.L // 2)
        if radius is None:
            radius = 0.4 * lattice.L
        if radius <= 0 or radius > 0.5 * lattice.L:
            raise ValueError(f"partition radius {radius} does not fit a lattice of size {lattice.L}")
        self._lattice = lattice
        self._center = (center[0] % lattice.L, center[1] % lattice.L)
        self._radius = float(radius)

        xs, ys = lattice.site_grid()
        dx = lattice.wrap(xs - self._center[0])
        dy = lattice.wrap(ys - self._center[1])
        r = np.sqrt(dx * dx + dy * dy)
        theta = np.mod(np.arctan2(dy, dx), 2.0 * np.pi)
        sector = np.minimum((theta / (2.0 * np.pi / 3.0)).astype(int), 2)
        inside = r < self._radius
        self._sites = tuple(np.flatnonzero(inside & (sector == s)) for s in range(3))

    @property
    def lattice(self) -> LatticeSpec:
        return self._lattice

    @property
    def center(self) -> Tuple[int, int]:
        return self._center

    @property
    def radius(self) -> float:
        return self._radius

    @property
    def sites(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self._sites

    def modes(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(site_modes(s) for s in self._sites)

    def projectors(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Diagonals of P_A, P_B, P_C over the physical modes."""
        ret = []
        for modes in self.modes():
            diag = np.zeros(self._lattice.n_modes)
            diag[modes] = 1.0
            ret.append(diag)
        return tuple(ret)


class StripRegions:
    """
    Two full-height strips of columns. The default places strips of width
    L/4 at x in [0, L/4) and x in [L/2, 3L/4).
    """
    def __init__(self, lattice: LatticeSpec, columns_a: Sequence[int]=None, columns_b: Sequence[int]=None):
        width = max(1, lattice.L // 4)
        if columns_a is None:
            columns_a = range(0, width)
        if columns_b is None:
            columns_b = range(lattice.L // 2, lattice.L // 2 + width)
        self._columns_a = np.unique(np.asarray(list(columns_a)) % lattice.L)
        self._columns_b = np.unique(np.asarray(list(columns_b)) % lattice.L)
        if np.intersect1d(self._columns_a, self._columns_b).size:
            raise ValueError("strips a and b overlap")
        self._lattice = lattice

    @property
    def columns_a(self) -> np.ndarray:
        return self._columns_a

    @property
    def columns_b(self) -> np.ndarray:
        return self._columns_b

    @property
    def modes_a(self) -> np.ndarray:
        return self._lattice.modes_of_columns(self._columns_a)

    @property
    def modes_b(self) -> np.ndarray:
        return self._lattice.modes_of_columns(self._columns_b)

    def describe(self) -> Dict[str, list]:
        return {"a": self._columns_a.tolist(), "b": self._columns_b.tolist()}


def _chern_at(G: np.ndarray, partition: TripleRegionPartition) -> complex:
    a, b, c = partition.modes()
    G_ab = G[np.ix_(a, b)]
    G_bc = G[np.ix_(b, c)]
    G_ca = G[np.ix_(c, a)]
    G_ac = G[np.ix_(a, c)]
    G_cb = G[np.ix_(c, b)]
    G_ba = G[np.ix_(b, a)]
    forward = np.trace(G_ca @ G_ab @ G_bc)
    backward = np.trace(G_ac @ G_cb @ G_ba)
    return 12.0j * np.pi * (forward - backward)


def chern_real_space(G: MatrixLike, partition: TripleRegionPartition, self_average: bool=False) -> float:
    """
    12 pi i [tr(G P_A G P_B G P_C) - tr(G P_C G P_B G P_A)], optionally averaged
    over every center position of the partition.
    """
    G = _as_array(G)
    lattice = partition.lattice
    _check_physical(G, lattice)
    if self_average:
        values = [_chern_at(G, TripleRegionPartition(lattice, lattice.site_coords(s), partition.radius))
                  for s in range(lattice.n_cells)]
        value = complex(np.mean(values))
    else:
        value = _chern_at(G, partition)
    if abs(value.imag) > IMAG_TOL:
        _logger.warning("real-space Chern number has imaginary part %.3e", value.imag)
    return float(value.real)


def chern_marker(G: MatrixLike, lattice: LatticeSpec, margin: int=MARKER_MARGIN) -> np.ndarray:
    """
    Local marker 2 pi i sum_mu [G X G Y G - G Y G X G]_{(r,mu),(r,mu)} as a
    field [x, y]. Sites within `margin` of the coordinate seam are NaN.
    """
    G = _as_array(G)
    _check_physical(G, lattice)
    if margin < 1:
        _logger.warning("position operators are ill-defined at the periodic seam; marker near x, y = 0 is unreliable")
    sites = np.arange(lattice.n_modes) // 2
    x = (sites % lattice.L).astype(float)
    y = (sites // lattice.L).astype(float)
    GX = G * x[None, :]
    GY = G * y[None, :]
    diag = np.einsum("ij,ji->i", GX @ GY, G) - np.einsum("ij,ji->i", GY @ GX, G)
    per_site = (2.0j * np.pi * diag).reshape(lattice.n_cells, 2).sum(axis=1)
    field = np.real(per_site).reshape(lattice.L, lattice.L).T.copy()
    if margin > 0:
        edge = np.r_[0:margin, lattice.L - margin:lattice.L]
        field[edge, :] = np.nan
        field[:, edge] = np.nan
    return field


def marker_column_average(field: np.ndarray, columns: Sequence[int]) -> float:
    return float(np.nanmean(field[np.asarray(columns), :]))


def binary_entropy(eig: np.ndarray) -> np.ndarray:
    eig = np.clip(np.real(eig), 0.0, 1.0)
    return -(xlogy(eig, eig) + xlogy(1.0 - eig, 1.0 - eig))


def entanglement_entropy(G: MatrixLike, modes: Sequence[int]) -> float:
    """Von Neumann entropy in nats of the modes `modes`."""
    G = _as_array(G)
    modes = np.asarray(modes, dtype=np.intp)
    if modes.size == 0:
        return 0.0
    eig = np.linalg.eigvalsh(G[np.ix_(modes, modes)])
    return float(np.sum(binary_entropy(eig)))


def mutual_information(G: MatrixLike, strips: StripRegions) -> float:
    a = strips.modes_a
    b = strips.modes_b
    if np.intersect1d(a, b).size:
        raise ValueError("mutual information regions overlap")
    ab = np.union1d(a, b)
    return entanglement_entropy(G, a) + entanglement_entropy(G, b) - entanglement_entropy(G, ab)


def entanglement_contour(G: MatrixLike, lattice: LatticeSpec, modes: Sequence[int]=None) -> np.ndarray:
    """
    Entanglement contour of the region `modes`, summed onto unit cells as a
    field [x, y]. Modes beyond the physical layer fold onto the cell they sit
    above, so the field integrates to the entropy of the region.
    """
    G = _as_array(G)
    if modes is None:
        modes = np.arange(G.shape[0])
    modes = np.asarray(modes, dtype=np.intp)
    field = np.zeros(lattice.n_cells)
    if modes.size == 0:
        return field.reshape(lattice.L, lattice.L).T
    eig, vec = np.linalg.eigh(G[np.ix_(modes, modes)])
    per_mode = (np.abs(vec) ** 2) @ binary_entropy(eig)
    cells = (modes // 2) % lattice.n_cells
    np.add.at(field, cells, per_mode)
    return field.reshape(lattice.L, lattice.L).T.copy()


def correlation_decay(G: MatrixLike, lattice: LatticeSpec) -> np.ndarray:
    """
    C(r) for r = 0..L//2, averaged over the x and y directions, base cells and
    orbital pairs: C_i(r) = (1/2L^2) sum |G_{(r',mu),(r'+r e_i,mu')}|^2.
    """
    G = _as_array(G)
    _check_physical(G, lattice)
    N = lattice.n_cells
    weight = (np.abs(G) ** 2).reshape(N, 2, N, 2).sum(axis=(1, 3))
    xs, ys = lattice.site_grid()
    base = np.arange(N)
    ret = np.empty(lattice.L // 2 + 1)
    for r in range(lattice.L // 2 + 1):
        cx = weight[base, lattice.site_index(xs + r, ys)].sum()
        cy = weight[base, lattice.site_index(xs, ys + r)].sum()
        ret[r] = 0.5 * (cx + cy) / (2.0 * N)
    return ret


def chord_distance(r, L: int) -> np.ndarray:
    return (L / np.pi) * np.sin(np.pi * np.asarray(r, dtype=float) / L)


class LinearFit(BaseModel):
    model_config = ConfigDict(extra="forbid")

    slope: float
    intercept: float
    r_squared: float
    aic: float


class DecayFit(BaseModel):
    model_config = ConfigDict(extra="forbid")

    r_min: int
    r_max: int
    exponential: LinearFit
    power_law: LinearFit
    preferred: str


def _linear_fit(x: np.ndarray, y: np.ndarray) -> LinearFit:
    res = stats.linregress(x, y)
    residual = y - (res.slope * x + res.intercept)
    n = x.size
    rss = max(float(np.sum(residual ** 2)), np.finfo(float).tiny)
    return LinearFit(slope=float(res.slope), intercept=float(res.intercept),
                     r_squared=float(res.rvalue ** 2), aic=float(n * np.log(rss / n) + 4.0))


def fit_decay(C: Sequence[float], L: int, r_min: int=2, r_max: int=None) -> DecayFit:
    """
    Fit ln C(r) linearly in r (exponential decay) and in ln chord(r) (power
    law) over r in [r_min, r_max], and prefer the model with lower AIC.
    """
    C = np.asarray(C, dtype=float)
    if r_max is None:
        r_max = L // 4
    r = np.arange(C.size)
    mask = (r >= r_min) & (r <= r_max) & (C > 0)
    if np.count_nonzero(mask) < 3:
        raise ValueError(f"need at least 3 positive points in r = [{r_min}, {r_max}] to fit a decay law")
    logc = np.log(C[mask])
    exponential = _linear_fit(r[mask].astype(float), logc)
    power = _linear_fit(np.log(chord_distance(r[mask], L)), logc)
    preferred = "exponential" if exponential.aic <= power.aic else "power_law"
    return DecayFit(r_min=r_min, r_max=r_max, exponential=exponential, power_law=power, preferred=preferred)


def spectral_gap(G: MatrixLike) -> float:
    """min of eigenvalues above 1/2 minus max of eigenvalues below 1/2."""
    eig = np.linalg.eigvalsh(_as_array(G))
    above = eig[eig > 0.5]
    below = eig[eig < 0.5]
    upper = float(above.min()) if above.size else 1.0
    lower = float(below.max()) if below.size else 0.0
    return upper - lower


def regularize(G: MatrixLike) -> CorrelationMatrix:
    """1/2 + sgn(G - 1/2)/2 applied through the spectrum."""
    G = _as_array(G)
    eig, vec = np.linalg.eigh(0.5 * (G + G.conj().T))
    close = np.abs(eig - 0.5) < REGULARIZE_TOL
    if np.any(close):
        raise GapClosedError(f"{int(np.count_nonzero(close))} eigenvalues at 1/2; regularization undefined")
    occupied = vec[:, eig > 0.5]
    return CorrelationMatrix(occupied @ occupied.conj().T, pure=True, check=False)


def regularized_chern(G: MatrixLike, partition: TripleRegionPartition, self_average: bool=False) -> float:
    return chern_real_space(regularize(G), partition, self_average)


def ow_occupations(G: MatrixLike, modes: OWModeSet) -> Dict[str, float]:
    """
    Mean occupation of every OW family, keyed like '-A' or '+B'. Lower-band
    values approach 1 and upper-band values 0 as the state is steered.
    """
    data = _as_array(G)
    _check_physical(data, modes.lattice)
    ret = {}
    for band in (Band.LOWER, Band.UPPER):
        for orbital in Orbital:
            occ = []
            for mode in modes.band_modes(band, (orbital,)):
                w = mode.wavefunction
                block = data[np.ix_(w.support, w.support)]
                occ.append(np.real(np.vdot(w.amplitudes, block @ w.amplitudes)))
            ret[f"{band.symbol}{orbital.name}"] = float(np.mean(occ))
    return ret

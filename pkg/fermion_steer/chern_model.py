#!/bin/env python3
"""
Two-band Chern insulator on the square lattice.

Bloch Hamiltonian h(k) = n(k).sigma with n(k) = (sin kx, sin ky, alpha - cos kx - cos ky).
The band projectors P_+-(k) = (1 +- n_hat.sigma)/2 define the overcomplete
Wannier (OW) modes

    chi_{r,nu,+-} ~ sum_k e^{ik.r} tau_nu^dag P_+-(k) c(k)

with orbital vectors tau_A = (1, 1)/sqrt(2) and tau_B = (1, -1)/sqrt(2).
"""

import logging
from enum import IntEnum
from functools import lru_cache
from typing import Dict, Iterator, List, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from .errors import DimensionError, GapClosedError
from .gaussian import CorrelationMatrix, ModeVector
from .lattice import AlphaField, LatticeSpec, is_near_gapless

_logger = logging.getLogger(__name__)

GAP_TOL = 1e-12
ZERO_THRESHOLD = 1e-6
RANK_TOL = 1e-8

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
IDENTITY2 = np.eye(2, dtype=np.complex128)


class Orbital(IntEnum):
    A = 0
    B = 1


class Band(IntEnum):
    LOWER = -1
    UPPER = 1

    @property
    def symbol(self) -> str:
        return "+" if self is Band.UPPER else "-"

    @classmethod
    def from_symbol(cls, symbol: str) -> "Band":
        if symbol == "+":
            return cls.UPPER
        if symbol == "-":
            return cls.LOWER
        raise ValueError(f"unknown band symbol {symbol!r}")


DEFAULT_TAU = (
    np.array([1.0, 1.0], dtype=np.complex128) / np.sqrt(2.0),
    np.array([1.0, -1.0], dtype=np.complex128) / np.sqrt(2.0),
)


def bloch_vector(k, alpha: float) -> np.ndarray:
    """n(k); k may be a pair of arrays, the result has a trailing axis of 3."""
    kx, ky = np.asarray(k[0], dtype=float), np.asarray(k[1], dtype=float)
    return np.stack([np.sin(kx), np.sin(ky), alpha - np.cos(kx) - np.cos(ky)], axis=-1)


def _projectors_from_n(n: np.ndarray, regularize: bool) -> Tuple[np.ndarray, np.ndarray]:
    norm = np.linalg.norm(n, axis=-1)
    gapless = norm < GAP_TOL
    if np.any(gapless):
        if not regularize:
            raise GapClosedError(f"band gap closes: |n(k)| = {float(np.min(norm)):.3e}")
        _logger.warning("band gap closes at %d momenta; using P = 1/2 there", int(np.count_nonzero(gapless)))
    safe = np.where(gapless, 1.0, norm)
    nhat = n / safe[..., None]
    nhat[gapless] = 0.0
    nsigma = (nhat[..., 0, None, None] * SIGMA_X + nhat[..., 1, None, None] * SIGMA_Y
              + nhat[..., 2, None, None] * SIGMA_Z)
    return 0.5 * (IDENTITY2 + nsigma), 0.5 * (IDENTITY2 - nsigma)


def band_projectors(k, alpha: float) -> Tuple[np.ndarray, np.ndarray]:
    """(P_+, P_-) at momentum k. Raises GapClosedError when |n(k)| vanishes."""
    return _projectors_from_n(bloch_vector(k, alpha), regularize=False)


def projector_grid(lattice: LatticeSpec, alpha: float, band: Band) -> np.ndarray:
    """P_band on the lattice momentum grid, shape (L, L, 2, 2)."""
    if is_near_gapless(alpha):
        _logger.warning("alpha = %g is near a gapless point; localization length diverges", alpha)
    kx, ky = lattice.momenta()
    p_plus, p_minus = _projectors_from_n(bloch_vector((kx, ky), alpha), regularize=True)
    return p_plus if band == Band.UPPER else p_minus


def _tau_key(tau) -> tuple:
    if tau is None:
        return None
    return tuple(tuple(complex(c) for c in np.asarray(t).ravel()) for t in tau)


@lru_cache(maxsize=64)
def _ow_profile_cached(L: int, alpha: float, orbital: int, band: int, tau_key) -> np.ndarray:
    lattice = LatticeSpec(L)
    tau = DEFAULT_TAU[orbital] if tau_key is None else np.array(tau_key[orbital], dtype=np.complex128)
    P = projector_grid(lattice, alpha, Band(band))
    ptau = P @ tau
    phi = np.fft.ifft2(ptau, axes=(0, 1))
    norm = np.linalg.norm(phi)
    if norm < GAP_TOL:
        raise GapClosedError(f"OW profile vanishes for alpha = {alpha}")
    phi = phi / norm
    phi.setflags(write=False)
    return phi


def ow_profile(lattice: LatticeSpec, alpha: float, orbital: Orbital, band: Band, tau=None) -> np.ndarray:
    """
    Normalized wavefunction profile phi[x, y, mu] of the OW mode centered at
    the origin. The mode annihilator has amplitudes w = conj(phi).
    """
    return _ow_profile_cached(lattice.L, float(alpha), int(orbital), int(band), _tau_key(tau))


def _profile_to_mode(lattice: LatticeSpec, phi: np.ndarray) -> ModeVector:
    #flat index 2*(x + L*y) + mu runs over x fastest
    flat = np.transpose(phi, (1, 0, 2)).ravel()
    return ModeVector(lattice.n_modes, flat.conj(), normalize=True)


class OWMode:
    def __init__(self, center: Tuple[int, int], orbital: Orbital, band: Band,
                 wavefunction: ModeVector, shell: int=None):
        self._center = (int(center[0]), int(center[1]))
        self._orbital = Orbital(orbital)
        self._band = Band(band)
        self._wavefunction = wavefunction
        self._shell = shell

    @property
    def center(self) -> Tuple[int, int]:
        return self._center

    @property
    def orbital(self) -> Orbital:
        return self._orbital

    @property
    def band(self) -> Band:
        return self._band

    @property
    def wavefunction(self) -> ModeVector:
        return self._wavefunction

    @property
    def shell(self) -> int:
        """Truncation radius, None when untruncated."""
        return self._shell

    def __repr__(self) -> str:
        return (f"OWMode(center={self._center}, orbital={self._orbital.name}, "
                f"band={self._band.symbol}, shell={self._shell})")


def build_ow_mode(lattice: LatticeSpec, alpha: float, r: Tuple[int, int], orbital: Orbital,
                  band: Band, tau=None) -> OWMode:
    phi = np.roll(ow_profile(lattice, alpha, orbital, band, tau), (r[0], r[1]), axis=(0, 1))
    return OWMode((r[0] % lattice.L, r[1] % lattice.L), orbital, band, _profile_to_mode(lattice, phi))


def truncation_window(lattice: LatticeSpec, center: Tuple[int, int], n_shell: int) -> np.ndarray:
    """Flat mode indices within the (2 n_shell + 1)^2 window around center."""
    xs, ys = lattice.site_grid()
    inside = ((np.abs(lattice.wrap(xs - center[0])) <= n_shell)
              & (np.abs(lattice.wrap(ys - center[1])) <= n_shell))
    sites = np.flatnonzero(inside)
    return np.sort(np.concatenate([2 * sites, 2 * sites + 1]))


def truncate(mode: OWMode, n_shell: int, lattice: LatticeSpec=None) -> OWMode:
    if n_shell < 1:
        raise ValueError(f"truncation shell must be at least 1, got {n_shell}")
    w = mode.wavefunction
    if lattice is None:
        L = int(round(np.sqrt(w.dim // 2)))
        lattice = LatticeSpec(L)
    if 2 * n_shell + 1 >= lattice.L:
        return OWMode(mode.center, mode.orbital, mode.band, w, None)
    window = truncation_window(lattice, mode.center, n_shell)
    keep = np.isin(w.support, window)
    truncated = ModeVector(w.dim, w.amplitudes[keep], support=w.support[keep], normalize=True)
    return OWMode(mode.center, mode.orbital, mode.band, truncated, n_shell)


class OWModeSet:
    """
    All 4 L^2 OW modes chi_{r,nu,+-} of a lattice. Modes centered at r use the
    local alpha value at r.
    """
    def __init__(self, lattice: LatticeSpec, modes: Dict[Tuple[int, int, int], OWMode]):
        expected = 4 * lattice.n_cells
        if len(modes) != expected:
            raise DimensionError(f"expected {expected} OW modes, got {len(modes)}")
        self._lattice = lattice
        self._modes = dict(modes)

    @classmethod
    def build(cls, field: AlphaField, n_shell: int=None, tau=None) -> "OWModeSet":
        lattice = field.lattice
        modes = {}
        for site in range(lattice.n_cells):
            x, y = lattice.site_coords(site)
            alpha = field.at(x, y)
            for orbital in Orbital:
                for band in Band:
                    mode = build_ow_mode(lattice, alpha, (x, y), orbital, band, tau)
                    if n_shell is not None:
                        mode = truncate(mode, n_shell, lattice)
                    modes[(site, int(orbital), int(band))] = mode
        _logger.debug("built %d OW modes on %r (shell %s)", len(modes), lattice, n_shell)
        return cls(lattice, modes)

    @property
    def lattice(self) -> LatticeSpec:
        return self._lattice

    def get(self, site: int, orbital: Orbital, band: Band) -> OWMode:
        return self._modes[(site, int(orbital), int(band))]

    def band_modes(self, band: Band, orbitals: Sequence[Orbital]=(Orbital.A, Orbital.B)) -> List[OWMode]:
        return [self._modes[(site, int(o), int(band))]
                for site in range(self._lattice.n_cells) for o in orbitals]

    def __iter__(self) -> Iterator[OWMode]:
        return iter(self._modes[key] for key in sorted(self._modes))

    def __len__(self) -> int:
        return len(self._modes)


def ground_state_correlation(lattice: LatticeSpec, alpha: float) -> CorrelationMatrix:
    """
    Correlation matrix of the half-filled ground state (lower band full).
    """
    kx, ky = lattice.momenta()
    _, p_minus = band_projectors((kx, ky), alpha)
    kernel = np.fft.ifft2(p_minus, axes=(0, 1))
    xs, ys = lattice.site_grid()
    dx = (xs[:, None] - xs[None, :]) % lattice.L
    dy = (ys[:, None] - ys[None, :]) % lattice.L
    blocks = kernel[dx, dy]
    P = np.transpose(blocks, (0, 2, 1, 3)).reshape(lattice.n_modes, lattice.n_modes)
    return CorrelationMatrix(P.conj(), pure=True, check=False)


def lattice_hamiltonian(field: AlphaField) -> np.ndarray:
    """
    Real-space single-particle Hamiltonian with on-site alpha_R sigma_z and
    hoppings T_x = (-sigma_z + i sigma_x)/2, T_y = (-sigma_z + i sigma_y)/2
    from R to R + x_hat, R + y_hat.
    """
    lattice = field.lattice
    L = lattice.L
    H = np.zeros((lattice.n_modes, lattice.n_modes), dtype=np.complex128)
    t_x = 0.5 * (-SIGMA_Z + 1j * SIGMA_X)
    t_y = 0.5 * (-SIGMA_Z + 1j * SIGMA_Y)
    for site in range(lattice.n_cells):
        x, y = lattice.site_coords(site)
        s = slice(2 * site, 2 * site + 2)
        H[s, s] += field.at(x, y) * SIGMA_Z
        for hop, (nx, ny) in ((t_x, (x + 1, y)), (t_y, (x, y + 1))):
            nb = lattice.site_index(nx, ny)
            t = slice(2 * nb, 2 * nb + 2)
            H[t, s] += hop
            H[s, t] += hop.conj().T
    return H


def ground_state_correlation_field(field: AlphaField) -> CorrelationMatrix:
    """Half-filled ground state of lattice_hamiltonian, valid for any alpha field."""
    lattice = field.lattice
    energies, vectors = np.linalg.eigh(lattice_hamiltonian(field))
    n_occ = lattice.n_cells
    gap = energies[n_occ] - energies[n_occ - 1]
    if gap < 1e-10:
        raise GapClosedError(f"no gap at half filling: {gap:.3e}")
    occupied = vectors[:, :n_occ]
    P = occupied @ occupied.conj().T
    return CorrelationMatrix(P.conj(), pure=True, check=False)


def band_overlap(k, tau: np.ndarray, band: Band, alpha: float) -> np.ndarray:
    n = bloch_vector(k, alpha)
    norm = np.linalg.norm(n, axis=-1)
    if np.any(norm < GAP_TOL):
        raise GapClosedError(f"band gap closes at alpha = {alpha}")
    nhat = n / norm[..., None]
    sigma_exp = np.array([
        2.0 * np.real(np.conj(tau[0]) * tau[1]),
        2.0 * np.imag(np.conj(tau[0]) * tau[1]),
        abs(tau[0])**2 - abs(tau[1])**2,
    ])
    return 0.5 * (np.vdot(tau, tau).real + int(band) * nhat @ sigma_exp)


def form_factor(k, orbital: Orbital, band: Band, alpha: float, grid_size: int=64, tau=None) -> complex:
    """
    f_{nu,band}(k) = <psi_band(k)|tau_nu> / sqrt(Z), with Z the mean of
    |<psi_band|tau_nu>|^2 over a grid_size x grid_size momentum grid. The
    phase is the gauge of the eigenvector returned by eigh; |f| is gauge free.
    """
    tau_vec = DEFAULT_TAU[orbital] if tau is None else np.asarray(tau[orbital], dtype=np.complex128)
    grid = LatticeSpec(grid_size).momenta()
    Z = float(np.mean(band_overlap(grid, tau_vec, band, alpha)))
    n = bloch_vector(k, alpha)
    norm = np.linalg.norm(n)
    if norm < GAP_TOL:
        raise GapClosedError(f"band gap closes at k = {tuple(k)}")
    h = n[0] * SIGMA_X + n[1] * SIGMA_Y + n[2] * SIGMA_Z
    _, vec = np.linalg.eigh(h)
    psi = vec[:, 1] if band == Band.UPPER else vec[:, 0]
    return complex(np.vdot(psi, tau_vec) / np.sqrt(Z))


def form_factor_zeros(lattice: LatticeSpec, orbital: Orbital, band: Band, alpha: float,
                      tau=None) -> List[Tuple[float, float]]:
    """
    Momenta where f_{nu,band} vanishes: local minima of |f|^2 on the lattice
    grid refined by Nelder-Mead, accepted when |f| < 1e-6.
    """
    tau_vec = DEFAULT_TAU[orbital] if tau is None else np.asarray(tau[orbital], dtype=np.complex128)
    kx, ky = lattice.momenta()
    fsq = band_overlap((kx, ky), tau_vec, band, alpha)
    Z = float(np.mean(fsq))
    fsq = fsq / Z

    is_min = np.ones_like(fsq, dtype=bool)
    for sx in (-1, 0, 1):
        for sy in (-1, 0, 1):
            if sx == 0 and sy == 0:
                continue
            is_min &= fsq <= np.roll(fsq, (sx, sy), axis=(0, 1))

    def objective(k):
        return float(band_overlap(k, tau_vec, band, alpha)) / Z

    zeros = []
    for i, j in zip(*np.nonzero(is_min)):
        start = np.array([kx[i, j], ky[i, j]])
        res = minimize(objective, start, method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-24, "maxiter": 4000})
        if np.sqrt(max(res.fun, 0.0)) >= ZERO_THRESHOLD:
            continue
        k = np.mod(res.x, 2.0 * np.pi)
        duplicate = False
        for other in zeros:
            d = np.abs(np.angle(np.exp(1j * (k - np.array(other)))))
            if np.all(d < 1e-5):
                duplicate = True
                break
        if not duplicate:
            zeros.append((float(k[0]), float(k[1])))
    return zeros


def overcomplete_rank(modes: OWModeSet, band: Band, orbitals: Sequence[Orbital]=(Orbital.A, Orbital.B)) -> int:
    """
    Numerical rank (singular values above 1e-8) of the stacked band-`band`
    OW wavefunctions of the given orbital families.
    """
    family = modes.band_modes(band, orbitals)
    W = np.array([m.wavefunction.dense() for m in family])
    singular = np.linalg.svd(W, compute_uv=False)
    return int(np.count_nonzero(singular > RANK_TOL))

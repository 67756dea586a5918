#!/bin/env python3
"""
Charge-conserving Gaussian fermionic states.

A state is stored through its correlation matrix G[i, j] = <c_i^dag c_j>.
A single-particle unitary u acting on wavefunctions as phi -> u phi is the
image of the many-body unitary exp(-sum_ij M_ij c_i^dag c_j) with u = exp(-M),
and it transforms the correlation matrix as

    G -> conj(u) @ G @ u.T

A mode chi = sum_i w_i c_i has occupation <chi^dag chi> = w^dag G w.
"""

import logging
from typing import Iterable, Sequence, Tuple

import numpy as np
from scipy.linalg import expm

from .errors import CorruptStateError, DimensionError, NotUnitaryError, OrthogonalityError

_logger = logging.getLogger(__name__)

#tolerances shared by all updates
HERMITIAN_TOL = 1e-10
SPECTRUM_TOL = 1e-9
IDEMPOTENT_TOL = 1e-8
NORM_TOL = 1e-12
UNITARY_TOL = 1e-12
ORTHOGONAL_TOL = 1e-10
BORN_GUARD = 1e-12


class ModeVector:
    """
    Normalized single-particle mode w, stored sparsely as (support, amplitudes).
    """
    def __init__(self, dim: int, amplitudes: np.ndarray=None, support: Sequence[int]=None,
                 normalize: bool=False):
        if dim <= 0:
            raise DimensionError(f"mode dimension must be positive, got {dim}")
        self._dim = int(dim)

        if support is None:
            dense = np.asarray(amplitudes, dtype=np.complex128).ravel()
            if dense.size != dim:
                raise DimensionError(f"expected {dim} amplitudes, got {dense.size}")
            idx = np.flatnonzero(np.abs(dense) > 0)
            amps = dense[idx]
        else:
            idx = np.asarray(support, dtype=np.intp).ravel()
            amps = np.asarray(amplitudes, dtype=np.complex128).ravel()
            if idx.size != amps.size:
                raise DimensionError(f"support has {idx.size} entries but {amps.size} amplitudes given")
            if idx.size and (idx.min() < 0 or idx.max() >= dim):
                raise DimensionError(f"support index out of range for dimension {dim}")
            keep = np.abs(amps) > 0
            order = np.argsort(idx[keep], kind="stable")
            idx = idx[keep][order]
            amps = amps[keep][order]

        norm = np.linalg.norm(amps)
        if normalize:
            if norm == 0.0:
                raise ValueError("cannot normalize a zero mode")
            amps = amps / norm
        elif abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"mode is not normalized: |w| = {norm:.15g}")

        self._support = idx
        self._amplitudes = amps

    @classmethod
    def basis(cls, dim: int, index: int) -> "ModeVector":
        if not 0 <= index < dim:
            raise DimensionError(f"basis index {index} out of range for dimension {dim}")
        return cls(dim, np.ones(1), support=[index])

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def support(self) -> np.ndarray:
        return self._support

    @property
    def amplitudes(self) -> np.ndarray:
        return self._amplitudes

    def dense(self) -> np.ndarray:
        ret = np.zeros(self._dim, dtype=np.complex128)
        ret[self._support] = self._amplitudes
        return ret

    def overlap(self, other: "ModeVector") -> complex:
        """<self, other> = sum_i conj(w_i) v_i."""
        common, ia, ib = np.intersect1d(self._support, other._support, assume_unique=True,
                                        return_indices=True)
        if common.size == 0:
            return 0j
        return complex(np.vdot(self._amplitudes[ia], other._amplitudes[ib]))

    def embed(self, dim: int, offset: int=0) -> "ModeVector":
        return ModeVector(dim, self._amplitudes, support=self._support + offset)

    def __repr__(self) -> str:
        return f"ModeVector(dim={self._dim}, support={self._support.size})"


class SingleParticleUnitary:
    """
    Unitary u acting on wavefunctions. When a support is given the matrix acts on
    those modes only and as the identity elsewhere.
    """
    def __init__(self, matrix: np.ndarray, support: Sequence[int]=None, check: bool=True):
        matrix = np.asarray(matrix, dtype=np.complex128)
        assert matrix.ndim == 2
        if matrix.shape[0] != matrix.shape[1]:
            raise DimensionError(f"unitary must be square, got shape {matrix.shape}")
        if support is not None:
            support = np.asarray(support, dtype=np.intp).ravel()
            if support.size != matrix.shape[0]:
                raise DimensionError(f"support of size {support.size} for a {matrix.shape[0]}x{matrix.shape[0]} matrix")
        if check:
            deviation = np.max(np.abs(matrix.conj().T @ matrix - np.eye(matrix.shape[0])))
            if deviation > UNITARY_TOL:
                raise NotUnitaryError(f"matrix is not unitary: max|u^dag u - 1| = {deviation:.3e}")
        self._matrix = matrix
        self._support = support

    @classmethod
    def from_generator(cls, generator: np.ndarray, support: Sequence[int]=None) -> "SingleParticleUnitary":
        """
        Unitary of the many-body operator exp(-sum_ij M_ij c_i^dag c_j) for
        anti-Hermitian M.
        """
        return cls(expm(-np.asarray(generator, dtype=np.complex128)), support=support)

    @classmethod
    def swap(cls, i: int, j: int) -> "SingleParticleUnitary":
        return cls(np.array([[0, 1], [1, 0]], dtype=np.complex128), support=[i, j])

    @property
    def dim(self) -> int:
        return self._matrix.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def support(self) -> np.ndarray:
        return self._support


class RandomStream:
    """
    Portable random stream: PCG64 seeded through a SeedSequence built from the
    master seed and an optional key (for example the trajectory index).
    """
    def __init__(self, seed: int, key: Iterable[int]=()):
        self._seed = int(seed)
        self._key = tuple(int(k) for k in key)
        self._generator = np.random.Generator(np.random.PCG64(np.random.SeedSequence([self._seed, *self._key])))
        self._counter = 0

    @classmethod
    def for_trajectory(cls, master_seed: int, index: int) -> "RandomStream":
        return cls(master_seed, key=(index,))

    @property
    def seed(self) -> int:
        return self._seed

    @property
    def key(self) -> tuple:
        return self._key

    @property
    def counter(self) -> int:
        return self._counter

    @property
    def generator(self) -> np.random.Generator:
        return self._generator

    def random(self, size: int=None):
        self._counter += 1 if size is None else int(np.prod(size))
        return self._generator.random(size)

    def uniform(self, low: float, high: float, size: int=None):
        self._counter += 1 if size is None else int(np.prod(size))
        return self._generator.uniform(low, high, size)

    def normal(self, size=None):
        self._counter += 1 if size is None else int(np.prod(size))
        return self._generator.standard_normal(size)

    def choice(self, n: int, size: int, replace: bool=False) -> np.ndarray:
        self._counter += size
        return self._generator.choice(n, size=size, replace=replace)

    def permutation(self, n: int) -> np.ndarray:
        self._counter += n
        return self._generator.permutation(n)


class CorrelationMatrix:
    """
    Correlation matrix G[i, j] = <c_i^dag c_j> of a charge-conserving Gaussian state.

    All updates act in place on the stored matrix and keep it Hermitian with
    spectrum in [0, 1].
    """
    def __init__(self, data: np.ndarray, pure: bool=False, check: bool=True):
        data = np.array(data, dtype=np.complex128)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise DimensionError(f"correlation matrix must be square, got shape {data.shape}")
        self._data = data
        self._pure = bool(pure)
        if check:
            self.validate()

    @classmethod
    def product_state(cls, dim: int, occupations: Sequence[int]) -> "CorrelationMatrix":
        occupations = np.asarray(occupations)
        if occupations.size != dim:
            raise DimensionError(f"expected {dim} occupations, got {occupations.size}")
        if not np.all((occupations == 0) | (occupations == 1)):
            raise ValueError("occupations must be 0 or 1")
        return cls(np.diag(occupations.astype(np.complex128)), pure=True, check=False)

    @property
    def dim(self) -> int:
        return self._data.shape[0]

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def pure(self) -> bool:
        return self._pure

    @pure.setter
    def pure(self, value: bool) -> None:
        self._pure = bool(value)

    def copy(self) -> "CorrelationMatrix":
        return CorrelationMatrix(self._data.copy(), pure=self._pure, check=False)

    def restrict(self, indices: Sequence[int]) -> "CorrelationMatrix":
        indices = np.asarray(indices, dtype=np.intp)
        return CorrelationMatrix(self._data[np.ix_(indices, indices)], check=False)

    def validate(self) -> None:
        G = self._data
        herm = np.max(np.abs(G - G.conj().T)) if G.size else 0.0
        if herm > HERMITIAN_TOL:
            raise CorruptStateError(f"correlation matrix is not Hermitian: residual {herm:.3e}")
        eig = np.linalg.eigvalsh(0.5 * (G + G.conj().T))
        if eig.size and (eig[0] < -SPECTRUM_TOL or eig[-1] > 1.0 + SPECTRUM_TOL):
            raise CorruptStateError(f"spectrum [{eig[0]:.3e}, {eig[-1]:.3e}] leaves [0, 1]")
        if self._pure and self.purity_deviation() > IDEMPOTENT_TOL:
            raise CorruptStateError(f"state flagged pure but |G^2 - G| = {self.purity_deviation():.3e}")

    def sanitize(self) -> None:
        """Re-Hermitize and clamp the spectrum into [0, 1]."""
        G = 0.5 * (self._data + self._data.conj().T)
        eig, vec = np.linalg.eigh(G)
        if eig[0] < 0.0 or eig[-1] > 1.0:
            eig = np.clip(eig, 0.0, 1.0)
            G = (vec * eig) @ vec.conj().T
        self._data = G

    def __check_mode(self, w: ModeVector) -> None:
        if w.dim != self.dim:
            raise DimensionError(f"mode has dimension {w.dim}, state has {self.dim}")

    def apply_unitary(self, u: SingleParticleUnitary) -> None:
        G = self._data
        m = u.matrix
        if u.support is None:
            if u.dim != self.dim:
                raise DimensionError(f"unitary has dimension {u.dim}, state has {self.dim}")
            self._data = m.conj() @ G @ m.T
            return
        s = u.support
        if s.max() >= self.dim:
            raise DimensionError(f"unitary support exceeds state dimension {self.dim}")
        G[s, :] = m.conj() @ G[s, :]
        G[:, s] = G[:, s] @ m.T

    def occupation_expectation(self, w: ModeVector) -> float:
        self.__check_mode(w)
        Gw = self._data[np.ix_(w.support, w.support)] @ w.amplitudes
        return float(np.real(np.vdot(w.amplitudes, Gw)))

    def __born(self, w: ModeVector) -> Tuple[np.ndarray, float]:
        self.__check_mode(w)
        Gw = self._data[:, w.support] @ w.amplitudes
        p = float(np.real(np.vdot(w.amplitudes, Gw[w.support])))
        if p < -SPECTRUM_TOL or p > 1.0 + SPECTRUM_TOL:
            raise CorruptStateError(f"Born probability {p:.3e} outside [0, 1]")
        return Gw, min(max(p, 0.0), 1.0)

    def project_occupation(self, w: ModeVector, outcome: int) -> float:
        """
        Condition the state on the occupation outcome of mode w and return the
        prior probability of that outcome.
        """
        Gw, p = self.__born(w)
        self.__rank_one_update(w, Gw, p, outcome)
        return p if outcome == 1 else 1.0 - p

    def measure_occupation(self, w: ModeVector, rng: RandomStream) -> Tuple[int, float]:
        """
        Projective measurement of chi^dag chi. Returns (outcome, p) where p is the
        prior probability of outcome 1.
        """
        Gw, p = self.__born(w)
        if p < BORN_GUARD:
            outcome = 0
        elif 1.0 - p < BORN_GUARD:
            outcome = 1
        else:
            outcome = int(rng.random() < p)
        self.__rank_one_update(w, Gw, p, outcome)
        return outcome, p

    def __rank_one_update(self, w: ModeVector, Gw: np.ndarray, p: float, outcome: int) -> None:
        G = self._data
        s = w.support
        a = w.amplitudes
        block = np.outer(a, a.conj())
        if outcome == 1:
            if p < BORN_GUARD:
                raise CorruptStateError("conditioning on an outcome of vanishing probability")
            G -= np.outer(Gw, Gw.conj()) / p
            G[np.ix_(s, s)] += block
        elif outcome == 0:
            if 1.0 - p < BORN_GUARD:
                raise CorruptStateError("conditioning on an outcome of vanishing probability")
            x = Gw.copy()
            x[s] -= a
            G += np.outer(x, x.conj()) / (1.0 - p)
            G[np.ix_(s, s)] -= block
        else:
            raise ValueError(f"occupation outcome must be 0 or 1, got {outcome}")

    @staticmethod
    def weak_probabilities(p: float, kappa: float) -> Tuple[float, float]:
        """Born weights (P(+), P(-)) of the Kraus pair exp(+-kappa (n - 1/2))."""
        e = np.exp(-2.0 * kappa)
        return (p + e * (1.0 - p)) / (1.0 + e), ((1.0 - p) + e * p) / (1.0 + e)

    def weak_update(self, w: ModeVector, kappa: float, outcome: int) -> float:
        """Apply the Kraus operator of outcome +1 or -1 and return its probability."""
        if not np.isfinite(kappa) or kappa < 0.0:
            raise ValueError(f"measurement strength must be finite and non-negative, got {kappa}")
        if outcome not in (1, -1):
            raise ValueError(f"weak outcome must be +1 or -1, got {outcome}")
        Gw, p = self.__born(w)
        prob = self.weak_probabilities(p, kappa)[0 if outcome == 1 else 1]
        if prob < BORN_GUARD:
            raise CorruptStateError("conditioning on an outcome of vanishing probability")

        #coefficients of the update for K ~ 1 + (a - 1) n with a = exp(outcome*kappa),
        #written in terms of b = 1/a when a > 1 so that large kappa stays finite
        if outcome == 1:
            b = np.exp(-kappa)
            z = b * b + (1.0 - b * b) * p
            c1 = (1.0 - b * b) / z
            c2 = (b - b * b) / z
            c3 = (1.0 - b) ** 2 * p / z
        else:
            a = np.exp(-kappa)
            z = 1.0 + (a * a - 1.0) * p
            c1 = (a * a - 1.0) / z
            c2 = (a - 1.0) / z
            c3 = (a - 1.0) ** 2 * p / z

        G = self._data
        s = w.support
        amps = w.amplitudes
        G -= c1 * np.outer(Gw, Gw.conj())
        G[:, s] += c2 * np.outer(Gw, amps.conj())
        G[s, :] += c2 * np.outer(amps, Gw.conj())
        G[np.ix_(s, s)] += c3 * np.outer(amps, amps.conj())
        return prob

    def measure_occupation_weak(self, w: ModeVector, kappa: float, rng: RandomStream) -> Tuple[int, float]:
        if not np.isfinite(kappa) or kappa < 0.0:
            raise ValueError(f"measurement strength must be finite and non-negative, got {kappa}")
        p = self.occupation_expectation(w)
        p_plus, p_minus = self.weak_probabilities(min(max(p, 0.0), 1.0), kappa)
        if p_plus < BORN_GUARD:
            outcome = -1
        elif p_minus < BORN_GUARD:
            outcome = 1
        else:
            outcome = 1 if rng.random() < p_plus else -1
        return outcome, self.weak_update(w, kappa, outcome)

    def fswap(self, w_a: ModeVector, w_b: ModeVector) -> None:
        """
        Exchange the modes w_a and w_b. The single-particle action is the
        reflection 1 - 2 v v^dag with v = (w_a - w_b)/sqrt(2).
        """
        self.__check_mode(w_a)
        self.__check_mode(w_b)
        overlap = w_a.overlap(w_b)
        if abs(overlap) > ORTHOGONAL_TOL:
            raise OrthogonalityError(f"fSWAP modes overlap by {abs(overlap):.3e}")

        s = np.union1d(w_a.support, w_b.support)
        v = np.zeros(s.size, dtype=np.complex128)
        v[np.searchsorted(s, w_a.support)] += w_a.amplitudes
        v[np.searchsorted(s, w_b.support)] -= w_b.amplitudes
        v /= np.sqrt(2.0)

        G = self._data
        y = G[:, s] @ v
        q = np.vdot(v, y[s])
        G[s, :] -= 2.0 * np.outer(v, y.conj())
        G[:, s] -= 2.0 * np.outer(y, v.conj())
        G[np.ix_(s, s)] += 4.0 * q * np.outer(v, v.conj())

    def purity_deviation(self) -> float:
        G = self._data
        return float(np.max(np.abs(G @ G - G))) if G.size else 0.0

    def total_charge(self) -> float:
        return float(np.real(np.trace(self._data)))

    def __repr__(self) -> str:
        return f"CorrelationMatrix(dim={self.dim}, charge={self.total_charge():.6f})"


#functional spellings of the state constructors
product_state = CorrelationMatrix.product_state

#!/bin/env python3
"""
Exact Fock-space reference simulator for a handful of fermion modes.

Mode operators follow the Jordan-Wigner construction with mode 0 as the most
significant bit of the basis index: c_i = 1^(i) x a x Z^(n-i-1), with
a = [[0, 1], [0, 0]] in the single-mode basis (|0>, |1>).
"""

import logging
from functools import cache
from typing import Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.linalg import expm
from scipy.sparse.linalg import expm_multiply

from .errors import DimensionError
from .gaussian import CorrelationMatrix, ModeVector

_logger = logging.getLogger(__name__)

MAX_MODES = 10
NORM_TOL = 1e-12


def _check_modes(n_modes: int) -> None:
    if not 1 <= n_modes <= MAX_MODES:
        raise DimensionError(f"the Fock simulator supports 1 to {MAX_MODES} modes, got {n_modes}")


@cache
def construct_fermionic_operators(n_modes: int):
    """
    Sparse annihilation, creation and number operators for `n_modes` modes.
    """
    _check_modes(n_modes)
    id2 = sparse.identity(2, format="csr")
    z = sparse.csr_matrix([[1., 0.], [0., -1.]])
    a = sparse.csr_matrix([[0., 1.], [0., 0.]])
    alist = []
    for i in range(n_modes):
        c = sparse.identity(1, format="csr")
        for j in range(n_modes):
            if j < i:
                c = sparse.kron(c, id2)
            elif j == i:
                c = sparse.kron(c, a)
            else:
                c = sparse.kron(c, z)
        c = sparse.csr_matrix(c, dtype=np.complex128)
        c.eliminate_zeros()
        alist.append(c)
    clist = [sparse.csr_matrix(c.conj().T) for c in alist]
    nlist = []
    for i in range(n_modes):
        f = 1 << (n_modes - i - 1)
        data = np.array([1. if (n & f == f) else 0. for n in range(2**n_modes)])
        nlist.append(sparse.csr_matrix(sparse.diags(data).astype(np.complex128)))
    return alist, clist, nlist


class ManyBodyOperator:
    def __init__(self, n_modes: int, matrix):
        _check_modes(n_modes)
        dim = 2**n_modes
        if matrix.shape != (dim, dim):
            raise DimensionError(f"expected a {dim}x{dim} operator, got shape {matrix.shape}")
        self._n_modes = n_modes
        self._matrix = matrix

    @property
    def n_modes(self) -> int:
        return self._n_modes

    @property
    def matrix(self):
        return self._matrix

    def dense(self) -> np.ndarray:
        if sparse.issparse(self._matrix):
            return self._matrix.toarray()
        return np.asarray(self._matrix)

    def dagger(self) -> "ManyBodyOperator":
        return ManyBodyOperator(self._n_modes, self._matrix.conj().T)

    def __matmul__(self, other):
        if isinstance(other, ManyBodyOperator):
            return ManyBodyOperator(self._n_modes, self._matrix @ other._matrix)
        if isinstance(other, FockState):
            return FockState(self._n_modes, self._matrix @ other.amplitudes, check=False)
        return NotImplemented

    def __add__(self, other: "ManyBodyOperator") -> "ManyBodyOperator":
        return ManyBodyOperator(self._n_modes, self._matrix + other._matrix)

    def __sub__(self, other: "ManyBodyOperator") -> "ManyBodyOperator":
        return ManyBodyOperator(self._n_modes, self._matrix - other._matrix)

    def __mul__(self, scalar) -> "ManyBodyOperator":
        return ManyBodyOperator(self._n_modes, scalar * self._matrix)

    __rmul__ = __mul__

    def trace(self) -> complex:
        return complex(self._matrix.diagonal().sum())


class FockState:
    def __init__(self, n_modes: int, amplitudes: np.ndarray, check: bool=True):
        _check_modes(n_modes)
        amplitudes = np.asarray(amplitudes, dtype=np.complex128).ravel()
        if amplitudes.size != 2**n_modes:
            raise DimensionError(f"expected {2**n_modes} amplitudes, got {amplitudes.size}")
        if check and abs(np.linalg.norm(amplitudes) - 1.0) > NORM_TOL:
            raise ValueError(f"Fock state is not normalized: norm {np.linalg.norm(amplitudes):.15g}")
        self._n_modes = n_modes
        self._amplitudes = amplitudes

    @classmethod
    def from_occupations(cls, occupations: Sequence[int]) -> "FockState":
        n = len(occupations)
        index = 0
        for bit in occupations:
            if bit not in (0, 1):
                raise ValueError(f"occupations must be 0 or 1, got {bit}")
            index = (index << 1) | int(bit)
        amps = np.zeros(2**n, dtype=np.complex128)
        amps[index] = 1.0
        return cls(n, amps)

    @property
    def n_modes(self) -> int:
        return self._n_modes

    @property
    def amplitudes(self) -> np.ndarray:
        return self._amplitudes

    def norm(self) -> float:
        return float(np.linalg.norm(self._amplitudes))

    def normalized(self) -> "FockState":
        norm = self.norm()
        if norm == 0.0:
            raise ValueError("cannot normalize the null vector")
        return FockState(self._n_modes, self._amplitudes / norm)

    def expectation(self, op: ManyBodyOperator) -> complex:
        return complex(np.vdot(self._amplitudes, op.matrix @ self._amplitudes))


def mode_operator(n_modes: int, i: int) -> ManyBodyOperator:
    """Annihilation operator c_i."""
    _check_modes(n_modes)
    if not 0 <= i < n_modes:
        raise DimensionError(f"mode index {i} out of range for {n_modes} modes")
    alist, _, _ = construct_fermionic_operators(n_modes)
    return ManyBodyOperator(n_modes, alist[i])


def anticommutation_residual(n_modes: int) -> float:
    """Largest deviation from {c_i, c_j^dag} = delta_ij and {c_i, c_j} = 0."""
    alist, clist, _ = construct_fermionic_operators(n_modes)
    ident = sparse.identity(2**n_modes, format="csr")
    worst = 0.0
    for i in range(n_modes):
        for j in range(n_modes):
            acomm = alist[i] @ clist[j] + clist[j] @ alist[i]
            if i == j:
                acomm = acomm - ident
            worst = max(worst, abs(acomm).max() if acomm.nnz else 0.0)
            acomm = alist[i] @ alist[j] + alist[j] @ alist[i]
            worst = max(worst, abs(acomm).max() if acomm.nnz else 0.0)
    return float(worst)


def quadratic_operator(M: np.ndarray) -> ManyBodyOperator:
    """sum_ij M_ij c_i^dag c_j"""
    M = np.asarray(M, dtype=np.complex128)
    assert M.ndim == 2 and M.shape[0] == M.shape[1]
    n = M.shape[0]
    alist, clist, _ = construct_fermionic_operators(n)
    ret = sparse.csr_matrix((2**n, 2**n), dtype=np.complex128)
    for i, j in zip(*np.nonzero(M)):
        ret = ret + M[i, j] * (clist[i] @ alist[j])
    return ManyBodyOperator(n, ret)


def gaussian_operator(M: np.ndarray) -> ManyBodyOperator:
    """Dense exp(-sum_ij M_ij c_i^dag c_j)."""
    quad = quadratic_operator(M)
    return ManyBodyOperator(quad.n_modes, expm(-quad.dense()))


def evolve_gaussian(state: FockState, M: np.ndarray) -> FockState:
    """
    Apply exp(-sum_ij M_ij c_i^dag c_j). The result is not normalized.
    """
    M = np.asarray(M, dtype=np.complex128)
    if M.shape != (state.n_modes, state.n_modes):
        raise DimensionError(f"expected a {state.n_modes}x{state.n_modes} generator, got shape {M.shape}")
    quad = quadratic_operator(M)
    amps = expm_multiply(-quad.matrix.tocsc(), state.amplitudes)
    return FockState(state.n_modes, amps, check=False)


def correlation_of(state: FockState) -> CorrelationMatrix:
    """G_ij = <c_i^dag c_j> of a normalized state."""
    alist, clist, _ = construct_fermionic_operators(state.n_modes)
    n = state.n_modes
    psi = state.amplitudes
    lowered = [a @ psi for a in alist]
    G = np.empty((n, n), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            G[i, j] = np.vdot(lowered[i], lowered[j])
    return CorrelationMatrix(G, check=False)


def mode_annihilator(w: ModeVector) -> ManyBodyOperator:
    """chi = sum_i w_i c_i"""
    alist, _, _ = construct_fermionic_operators(w.dim)
    ret = sparse.csr_matrix((2**w.dim, 2**w.dim), dtype=np.complex128)
    for i, amp in zip(w.support, w.amplitudes):
        ret = ret + amp * alist[i]
    return ManyBodyOperator(w.dim, ret)


def mode_number(w: ModeVector) -> ManyBodyOperator:
    chi = mode_annihilator(w)
    return chi.dagger() @ chi


def project_mode(state: FockState, w: ModeVector, outcome: int) -> Tuple[FockState, float]:
    """Post-measurement state and probability for occupation outcome 0 or 1."""
    n_op = mode_number(w)
    projected = n_op @ state
    if outcome == 0:
        projected = FockState(state.n_modes, state.amplitudes - projected.amplitudes, check=False)
    prob = projected.norm()**2
    return projected.normalized(), float(prob)


def weak_measure_mode(state: FockState, w: ModeVector, kappa: float, outcome: int) -> Tuple[FockState, float]:
    """
    Kraus operator exp(outcome*kappa*(n - 1/2)) / sqrt(2 cosh kappa) on mode w.
    """
    n_op = mode_number(w).dense()
    kraus = expm(outcome * kappa * (n_op - 0.5 * np.eye(n_op.shape[0]))) / np.sqrt(2.0 * np.cosh(kappa))
    out = FockState(state.n_modes, kraus @ state.amplitudes, check=False)
    prob = out.norm()**2
    return out.normalized(), float(prob)


def fswap_generator(w_a: ModeVector, w_b: ModeVector) -> np.ndarray:
    """
    Generator M of exp(i pi e^dag e) with e = (chi_a - chi_b)/sqrt(2), in the
    exp(-sum M c^dag c) form.
    """
    v = (w_a.dense() - w_b.dense()) / np.sqrt(2.0)
    return -1j * np.pi * np.outer(v.conj(), v)


def majorana_operators(n_modes: int) -> list:
    """gamma_2i = c_i + c_i^dag, gamma_2i+1 = i(c_i^dag - c_i)."""
    alist, clist, _ = construct_fermionic_operators(n_modes)
    ret = []
    for a, c in zip(alist, clist):
        ret.append(ManyBodyOperator(n_modes, a + c))
        ret.append(ManyBodyOperator(n_modes, 1j * (c - a)))
    return ret


def random_gaussian_state(n_modes: int, n_particles: int, generator: np.random.Generator) -> FockState:
    """Product state with `n_particles` in the first modes rotated by a random unitary."""
    occupations = [1] * n_particles + [0] * (n_modes - n_particles)
    h = generator.standard_normal((n_modes, n_modes)) + 1j * generator.standard_normal((n_modes, n_modes))
    h = 0.5 * (h + h.conj().T)
    return evolve_gaussian(FockState.from_occupations(occupations), 1j * h).normalized()


def wick_residual(state: FockState) -> float:
    """
    Largest violation of <c_i^dag c_j^dag c_k c_l> = G_il G_jk - G_ik G_jl.
    """
    n = state.n_modes
    alist, _, _ = construct_fermionic_operators(n)
    G = correlation_of(state).data
    psi = state.amplitudes
    worst = 0.0
    for i in range(n):
        for j in range(n):
            bra = alist[j] @ (alist[i] @ psi)
            for k in range(n):
                for l in range(n):
                    ket = alist[k] @ (alist[l] @ psi)
                    four = np.vdot(bra, ket)
                    wick = G[i, l] * G[j, k] - G[i, k] * G[j, l]
                    worst = max(worst, abs(four - wick))
    return float(worst)

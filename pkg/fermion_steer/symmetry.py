#!/bin/env python3
"""
Symmetry classes of Gaussian evolution operators.

A many-body evolution operator exp(-sum M_ij c_i^dag c_j) carries a
time-reversal (TRS), particle-hole (PHS) or chiral (CS) symmetry when

    TRS:  M = U_T^dag M* U_T
    PHS:  M = -(U_C^dag M U_C)^T
    CS:   M = -(U_S^dag M* U_S)^T

The transfer-matrix generators M of each class form a Lie algebra fixed by
linear constraints; samples are drawn from the null space of those
constraints and checked against the symmetries of the partner class.
"""

import logging
from enum import IntEnum
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.linalg import expm, null_space

from .errors import DimensionError, NotUnitaryError
from .gaussian import RandomStream

_logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-10
GENERIC_FAIL_TOL = 1e-6


class SymmetryKind(IntEnum):
    TRS = 0
    PHS = 1
    CS = 2


class ClassLabel(IntEnum):
    A = 0
    AIII = 1
    AI = 2
    BDI = 3
    D = 4
    DIII = 5
    AII = 6
    CII = 7
    C = 8
    CI = 9


def _omega() -> np.ndarray:
    return np.array([[0.0, 1.0], [-1.0, 0.0]])


def structure_matrix(name: str, n: int) -> np.ndarray:
    """
    Fixed matrices of the class definitions:
    I, S = sz x 1, Omega = (i sy) x 1, J = sz x (i sy) x 1, K = 1 x (i sy) x 1.
    """
    sz = np.diag([1.0, -1.0])
    if name == "I":
        return np.eye(n)
    if n % 2:
        raise DimensionError(f"structure matrix {name} needs an even dimension, got {n}")
    if name == "S":
        return np.kron(sz, np.eye(n // 2))
    if name == "Omega":
        return np.kron(_omega(), np.eye(n // 2))
    if n % 4:
        raise DimensionError(f"structure matrix {name} needs a dimension divisible by 4, got {n}")
    if name == "J":
        return np.kron(sz, np.kron(_omega(), np.eye(n // 4)))
    if name == "K":
        return np.kron(np.eye(2), np.kron(_omega(), np.eye(n // 4)))
    raise ValueError(f"unknown structure matrix {name!r}")


class SymmetryAction:
    """First-quantized action of TRS, PHS or CS with unitary U and sign U U* = +-1."""
    def __init__(self, kind: SymmetryKind, unitary: np.ndarray, sign: int=None, name: str=None):
        unitary = np.asarray(unitary, dtype=np.complex128)
        assert unitary.ndim == 2 and unitary.shape[0] == unitary.shape[1]
        n = unitary.shape[0]
        deviation = np.max(np.abs(unitary.conj().T @ unitary - np.eye(n)))
        if deviation > 1e-12:
            raise NotUnitaryError(f"symmetry matrix is not unitary: {deviation:.3e}")
        self._kind = SymmetryKind(kind)
        self._unitary = unitary
        self._name = name

        if self._kind == SymmetryKind.CS:
            self._sign = 0 if sign is None else sign
        else:
            square = unitary @ unitary.conj()
            if np.max(np.abs(square - np.eye(n))) < 1e-12:
                actual = 1
            elif np.max(np.abs(square + np.eye(n))) < 1e-12:
                actual = -1
            else:
                raise ValueError("U U* is neither +1 nor -1")
            if sign is not None and sign != actual:
                raise ValueError(f"declared sign {sign} but U U* = {actual}")
            self._sign = actual

    @property
    def kind(self) -> SymmetryKind:
        return self._kind

    @property
    def unitary(self) -> np.ndarray:
        return self._unitary

    @property
    def sign(self) -> int:
        return self._sign

    @property
    def key(self) -> Tuple[int, str, int]:
        return int(self._kind), self._name, self._sign

    def __repr__(self) -> str:
        signs = {1: "+", -1: "-", 0: ""}
        return f"{self._kind.name}{signs[self._sign]}({self._name})"


def symmetry_residual(M: np.ndarray, action: SymmetryAction) -> float:
    M = np.asarray(M, dtype=np.complex128)
    U = action.unitary
    if M.shape != U.shape:
        raise DimensionError(f"generator of shape {M.shape} against a symmetry of shape {U.shape}")
    Ud = U.conj().T
    if action.kind == SymmetryKind.TRS:
        rhs = Ud @ M.conj() @ U
    elif action.kind == SymmetryKind.PHS:
        rhs = -(Ud @ M @ U).T
    else:
        rhs = -(Ud @ M.conj() @ U).T
    return float(np.max(np.abs(M - rhs)))


def check_meo_symmetry(M: np.ndarray, action: SymmetryAction, tol: float=SYMMETRY_TOL) -> Tuple[bool, float]:
    residual = symmetry_residual(M, action)
    return residual <= tol, residual


#symmetries of each evolution-operator class as (kind, matrix, sign)
MEO_SYMMETRIES: Dict[ClassLabel, List[Tuple[SymmetryKind, str, int]]] = {
    ClassLabel.A: [],
    ClassLabel.AIII: [(SymmetryKind.CS, "S", 0)],
    ClassLabel.AI: [(SymmetryKind.TRS, "I", 1)],
    ClassLabel.BDI: [(SymmetryKind.TRS, "I", 1), (SymmetryKind.PHS, "S", 1), (SymmetryKind.CS, "S", 0)],
    ClassLabel.D: [(SymmetryKind.PHS, "I", 1)],
    ClassLabel.DIII: [(SymmetryKind.TRS, "Omega", -1), (SymmetryKind.PHS, "I", 1), (SymmetryKind.CS, "Omega", 0)],
    ClassLabel.AII: [(SymmetryKind.TRS, "Omega", -1)],
    ClassLabel.CII: [(SymmetryKind.TRS, "J", -1), (SymmetryKind.PHS, "K", -1), (SymmetryKind.CS, "S", 0)],
    ClassLabel.C: [(SymmetryKind.PHS, "Omega", -1)],
    ClassLabel.CI: [(SymmetryKind.TRS, "I", 1), (SymmetryKind.PHS, "Omega", -1), (SymmetryKind.CS, "Omega", 0)],
}

#transfer-matrix class -> evolution-operator class carrying its symmetries
MEO_PARTNER: Dict[ClassLabel, ClassLabel] = {
    ClassLabel.AIII: ClassLabel.A,
    ClassLabel.A: ClassLabel.AIII,
    ClassLabel.BDI: ClassLabel.AI,
    ClassLabel.D: ClassLabel.BDI,
    ClassLabel.DIII: ClassLabel.D,
    ClassLabel.AII: ClassLabel.DIII,
    ClassLabel.CII: ClassLabel.AII,
    ClassLabel.C: ClassLabel.CII,
    ClassLabel.CI: ClassLabel.C,
    ClassLabel.AI: ClassLabel.CI,
}

STM_OF_MEO: Dict[ClassLabel, ClassLabel] = {v: k for k, v in MEO_PARTNER.items()}


def requires_quadrupling(label: ClassLabel) -> bool:
    return label in (ClassLabel.C, ClassLabel.CII)


def check_dimension(label: ClassLabel, n: int, meo: bool=False) -> None:
    if meo:
        needs4 = any(name in ("J", "K") for _, name, _ in MEO_SYMMETRIES[label])
        needs2 = any(name != "I" for _, name, _ in MEO_SYMMETRIES[label])
    else:
        needs4 = label == ClassLabel.C
        needs2 = label not in (ClassLabel.AIII, ClassLabel.BDI, ClassLabel.DIII)
    if needs4 and n % 4:
        raise DimensionError(f"class {label.name} needs a dimension divisible by 4, got {n}")
    if needs2 and n % 2:
        raise DimensionError(f"class {label.name} needs an even dimension, got {n}")


def meo_actions(label: ClassLabel, n: int) -> List[SymmetryAction]:
    check_dimension(label, n, meo=True)
    return [SymmetryAction(kind, structure_matrix(name, n), None if kind == SymmetryKind.CS else sign, name)
            for kind, name, sign in MEO_SYMMETRIES[label]]


def _constraints(label: ClassLabel, n: int) -> List[Callable[[np.ndarray], np.ndarray]]:
    """R-linear maps whose common kernel is the transfer-matrix algebra."""
    S = structure_matrix("S", n) if n % 2 == 0 else None
    Om = structure_matrix("Omega", n) if n % 2 == 0 else None
    J = structure_matrix("J", n) if n % 4 == 0 else None

    def real(M):
        return M.imag.astype(np.complex128)

    table = {
        ClassLabel.AIII: [],
        ClassLabel.A: [lambda M: M @ S + S @ M.conj().T],
        ClassLabel.BDI: [real],
        ClassLabel.D: [real, lambda M: M.T @ S + S @ M],
        ClassLabel.DIII: [lambda M: M + M.T],
        ClassLabel.AII: [lambda M: M + M.T, lambda M: M.conj().T @ Om + Om @ M],
        ClassLabel.CII: [lambda M: Om.T @ M.conj() @ Om - M],
        ClassLabel.C: [lambda M: M.conj().T @ S + S @ M, lambda M: J.T @ M.conj() @ J - M],
        ClassLabel.CI: [lambda M: M.T @ Om + Om @ M],
        ClassLabel.AI: [real, lambda M: M @ Om + Om @ M.T],
    }
    return table[label]


def _unvec(x: np.ndarray, n: int) -> np.ndarray:
    return (x[:n * n] + 1j * x[n * n:]).reshape(n, n)


@lru_cache(maxsize=64)
def algebra_basis(label: ClassLabel, n: int) -> np.ndarray:
    """Real basis (columns) of the algebra in the 2 n^2 real coordinates of M."""
    check_dimension(label, n)
    constraints = _constraints(label, n)
    dim = 2 * n * n
    if not constraints:
        return np.eye(dim)
    rows = []
    for f in constraints:
        cols = []
        for k in range(dim):
            e = np.zeros(dim)
            e[k] = 1.0
            out = f(_unvec(e, n))
            cols.append(np.concatenate([out.real.ravel(), out.imag.ravel()]))
        rows.append(np.array(cols).T)
    basis = null_space(np.vstack(rows))
    basis.setflags(write=False)
    return basis


def algebra_residual(label: ClassLabel, M: np.ndarray) -> float:
    M = np.asarray(M, dtype=np.complex128)
    constraints = _constraints(label, M.shape[0])
    if not constraints:
        return 0.0
    return float(max(np.max(np.abs(f(M))) for f in constraints))


def sample_stm_algebra(label: ClassLabel, n: int, rng: RandomStream, scale: float=1.0) -> np.ndarray:
    """Random element of the class algebra with Frobenius norm `scale`."""
    basis = algebra_basis(ClassLabel(label), n)
    x = basis @ rng.normal(basis.shape[1])
    M = _unvec(x, n)
    norm = np.linalg.norm(M)
    if norm == 0.0:
        raise ValueError(f"class {ClassLabel(label).name} algebra is trivial at n = {n}")
    return scale * M / norm


def stm_group_residual(label: ClassLabel, t: np.ndarray) -> float:
    """Residual of the group relations satisfied by t = exp(M)."""
    t = np.asarray(t, dtype=np.complex128)
    n = t.shape[0]
    eye = np.eye(n)
    checks = []
    if label in (ClassLabel.AI, ClassLabel.BDI, ClassLabel.D):
        checks.append(np.abs(t.imag))
    if label == ClassLabel.A:
        S = structure_matrix("S", n)
        checks.append(t.conj().T @ S @ t - S)
    elif label == ClassLabel.AI:
        Om = structure_matrix("Omega", n)
        checks.append(t @ Om @ t.T - Om)
    elif label == ClassLabel.D:
        S = structure_matrix("S", n)
        checks.append(t.T @ S @ t - S)
    elif label == ClassLabel.DIII:
        checks.append(t.T @ t - eye)
    elif label == ClassLabel.AII:
        Om = structure_matrix("Omega", n)
        checks.append(t.T @ t - eye)
        checks.append(t.conj().T @ Om @ t - Om)
    elif label == ClassLabel.CII:
        Om = structure_matrix("Omega", n)
        checks.append(Om.T @ t.conj() @ Om - t)
    elif label == ClassLabel.C:
        S = structure_matrix("S", n)
        J = structure_matrix("J", n)
        checks.append(t.conj().T @ S @ t - S)
        checks.append(J.T @ t.conj() @ J - t)
    elif label == ClassLabel.CI:
        Om = structure_matrix("Omega", n)
        checks.append(t.T @ Om @ t - Om)
    if not checks:
        return 0.0
    return float(max(np.max(np.abs(c)) for c in checks))


def bdg_embedding(M: np.ndarray) -> np.ndarray:
    """M + (-M*) on the doubled Nambu space."""
    M = np.asarray(M, dtype=np.complex128)
    n = M.shape[0]
    ret = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    ret[:n, :n] = M
    ret[n:, n:] = -M.conj()
    return ret


def bdg_particle_hole_residual(M: np.ndarray) -> float:
    """sigma_x M~* sigma_x = -M~ for the Nambu embedding of M."""
    Mt = bdg_embedding(M)
    n = M.shape[0]
    sx = np.kron(np.array([[0.0, 1.0], [1.0, 0.0]]), np.eye(n))
    return float(np.max(np.abs(sx @ Mt.conj() @ sx + Mt)))


class CorrespondenceReport(BaseModel):
    model_config = ConfigDict(extra="forbid")

    stm_class: str
    meo_partner: str
    n: int
    samples: int
    algebra_residual: float
    group_residual: float
    closure_residual: float
    partner_residual: float
    implied_classes: List[str] = Field(default_factory=list)
    excluded_classes: Dict[str, float] = Field(default_factory=dict)
    skipped_classes: List[str] = Field(default_factory=list)
    passed: bool


def verify_correspondence(stm_class: ClassLabel, samples: int, rng: RandomStream, n: int=8) -> CorrespondenceReport:
    """
    Check that sampled transfer-matrix generators carry exactly the symmetries
    of the partner evolution-operator class. Classes whose symmetry set is
    contained in the partner's hold as well; every other class must fail at
    least one of its symmetries on each sample.
    """
    if samples < 1:
        raise ValueError(f"need at least one sample, got {samples}")
    stm_class = ClassLabel(stm_class)
    partner = MEO_PARTNER[stm_class]
    partner_keys = set(MEO_SYMMETRIES[partner])

    implied = []
    excluded = {}
    skipped = []
    for other in ClassLabel:
        try:
            check_dimension(other, n, meo=True)
        except DimensionError:
            skipped.append(other.name)
            continue
        if set(MEO_SYMMETRIES[other]) <= partner_keys:
            implied.append(other)
        else:
            excluded[other] = np.inf
    actions = {label: meo_actions(label, n) for label in implied + list(excluded)}

    alg = grp = clo = part = 0.0
    previous = None
    for _ in range(samples):
        M = sample_stm_algebra(stm_class, n, rng)
        alg = max(alg, algebra_residual(stm_class, M))
        grp = max(grp, stm_group_residual(stm_class, expm(M)))
        if previous is not None:
            clo = max(clo, algebra_residual(stm_class, M @ previous - previous @ M))
        previous = M
        for label in implied:
            for action in actions[label]:
                part = max(part, symmetry_residual(M, action))
        for label in excluded:
            worst = max((symmetry_residual(M, a) for a in actions[label]), default=0.0)
            excluded[label] = min(excluded[label], worst)

    passed = (alg <= 1e-12 and grp <= 1e-10 and clo <= 1e-10 and part <= SYMMETRY_TOL
              and all(v > GENERIC_FAIL_TOL for v in excluded.values()))
    if not passed:
        _logger.warning("correspondence check failed for transfer-matrix class %s", stm_class.name)
    return CorrespondenceReport(
        stm_class=stm_class.name, meo_partner=partner.name, n=n, samples=samples,
        algebra_residual=alg, group_residual=grp, closure_residual=clo, partner_residual=part,
        implied_classes=[c.name for c in implied],
        excluded_classes={c.name: float(v) for c, v in excluded.items()},
        skipped_classes=skipped, passed=passed,
    )


def verify_table(samples: int, rng: RandomStream, n: int=8) -> List[CorrespondenceReport]:
    return [verify_correspondence(label, samples, rng, n) for label in ClassLabel]

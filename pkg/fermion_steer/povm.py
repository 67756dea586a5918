#!/bin/env python3
"""
Gaussian POVMs by symmetry class.

Classes A, AI, BDI and D admit explicit two-outcome Gaussian POVMs; the
witnesses below show that sampled Kraus operators of AIII, C, CI, CII and
DIII always violate the completeness relation.
"""

import logging
from typing import List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.linalg import expm

from .fock import gaussian_operator, majorana_operators, mode_number
from .gaussian import ModeVector, RandomStream
from .symmetry import ClassLabel, STM_OF_MEO, sample_stm_algebra

_logger = logging.getLogger(__name__)

ADMISSIBLE = (ClassLabel.A, ClassLabel.AI, ClassLabel.BDI, ClassLabel.D)
INADMISSIBLE = (ClassLabel.AIII, ClassLabel.C, ClassLabel.CI, ClassLabel.CII, ClassLabel.DIII)

TRIVIAL_LAMBDA = 1e-3
SLACK_TOL = 1e-8


def povm_elements(label: ClassLabel, alpha: float, phase: float=0.3) -> List[tuple]:
    """(weight, Kraus matrix) pairs of the two-outcome construction on one mode."""
    label = ClassLabel(label)
    if label not in ADMISSIBLE:
        raise ValueError(f"class {label.name} has no Gaussian POVM construction")
    n = mode_number(ModeVector.basis(1, 0)).dense()
    ret = []
    if label in (ClassLabel.A, ClassLabel.AI):
        phi = phase if label == ClassLabel.A else 0.0
        for lam in (alpha, -alpha):
            weight = np.exp(-lam) / (2.0 * np.cosh(alpha))
            ret.append((weight, expm((lam + 1j * phi) * n)))
    else:
        gamma1, gamma2 = majorana_operators(1)
        parity = 1j * (gamma1 @ gamma2).dense()
        phi = phase if label == ClassLabel.D else 0.0
        for lam in (alpha, -alpha):
            weight = 1.0 / (2.0 * np.cosh(2.0 * alpha))
            ret.append((weight, expm(-(lam + 1j * phi) * parity)))
    return ret


def povm_check_construction(label: ClassLabel, alpha_param: float, phase: float=0.3) -> float:
    """max |sum_m w_m K_m^dag K_m - 1|"""
    total = sum(w * K.conj().T @ K for w, K in povm_elements(label, alpha_param, phase))
    return float(np.max(np.abs(total - np.eye(total.shape[0]))))


class WitnessSample(BaseModel):
    model_config = ConfigDict(extra="forbid")

    max_lambda: float
    slack: float
    pairing_residual: float
    trace_residual: float


class WitnessReport(BaseModel):
    model_config = ConfigDict(extra="forbid")

    meo_class: str
    n_modes: int
    samples: int
    skipped: int
    min_slack: float
    max_pairing_residual: float
    max_trace_residual: float
    records: List[WitnessSample] = Field(default_factory=list)
    passed: bool


def _modes_for(label: ClassLabel, n_modes: int) -> int:
    #C-type transfer matrices need a dimension divisible by 4, the others an even one
    step = 4 if label == ClassLabel.CII else 2
    n = max(n_modes, step)
    return n + (-n) % step


def _complex_witness(label: ClassLabel, n: int, rng: RandomStream) -> WitnessSample:
    M = sample_stm_algebra(STM_OF_MEO[label], n, rng)
    K = gaussian_operator(M).dense()
    kk = K.conj().T @ K
    t = expm(-M)
    lam = np.sort(np.log(np.linalg.eigvalsh(t.conj().T @ t)))

    pairing = float(np.max(np.abs(lam + lam[::-1])))
    if label == ClassLabel.CII:
        pairing = max(pairing, float(np.max(np.abs(lam[0::2] - lam[1::2]))))

    trace = float(np.real(np.trace(kk)))
    predicted = float(np.prod(1.0 + np.exp(lam)))
    ratio = trace / 2.0**n
    return WitnessSample(max_lambda=float(np.max(np.abs(lam))), slack=ratio - 1.0,
                         pairing_residual=pairing, trace_residual=abs(trace - predicted) / predicted)


def _diii_witness(n_modes: int, rng: RandomStream) -> WitnessSample:
    #4N Majoranas gamma_{s,i} at flat index s*2N + i
    n_maj = 2 * n_modes
    half = n_maj // 2
    M = sample_stm_algebra(ClassLabel.AII, n_maj, rng)
    gammas = [g.dense() for g in majorana_operators(n_modes)]
    quad = sum(M[a, b] * gammas[a] @ gammas[b] for a in range(n_maj) for b in range(n_maj))
    K = expm(-0.5 * quad)
    kk = K.conj().T @ K
    dim = kk.shape[0]

    Gamma = sum(1j * gammas[i] @ gammas[half + i] for i in range(half))
    Gamma2 = Gamma @ Gamma
    r1 = float(np.real(np.trace(kk))) / dim
    r2 = float(np.real(np.trace(kk @ Gamma2) / np.trace(Gamma2)))

    rho = kk / np.trace(kk)
    cov = np.array([[np.real(np.trace(rho @ (0.5j * (gammas[a] @ gammas[b] - gammas[b] @ gammas[a]))))
                     for b in range(n_maj)] for a in range(n_maj)])
    tanh_eps = np.sort(np.abs(np.linalg.eigvals(cov).imag))
    #each mode appears as a +-i tanh pair; take one of each pair
    eps = np.arctanh(np.clip(tanh_eps[0::2], 0.0, 1.0 - 1e-15))
    predicted_r1 = float(np.prod(np.cosh(eps)))

    kramers = np.sort(eps)
    pairing = float(np.max(np.abs(kramers[0::2] - kramers[1::2]))) if kramers.size > 1 else 0.0
    #r1 = prod_i cosh^2(lambda_i), r2 = r1 (1 + mean_i tanh^2(lambda_i)) over Kramers pairs i
    predicted_r2 = predicted_r1 * (1.0 + float(np.mean(np.tanh(kramers[0::2]) ** 2)))
    residual = max(abs(r1 - predicted_r1) / predicted_r1, abs(r2 - predicted_r2) / predicted_r2)
    return WitnessSample(max_lambda=float(np.max(eps)) if eps.size else 0.0, slack=r2 - r1,
                         pairing_residual=pairing, trace_residual=residual)


def povm_witness_inadmissible(label: ClassLabel, n_modes: int, samples: int, rng: RandomStream) -> WitnessReport:
    """
    Sample nontrivial Kraus operators of the class and certify that the
    completeness relation is violated with strictly positive slack.
    """
    label = ClassLabel(label)
    if label not in INADMISSIBLE:
        raise ValueError(f"class {label.name} has no inadmissibility witness")
    if label == ClassLabel.DIII:
        n = max(2, n_modes + n_modes % 2)
    else:
        n = _modes_for(label, n_modes)
    if n != n_modes:
        _logger.info("class %s witness uses %d modes instead of %d", label.name, n, n_modes)

    records = []
    skipped = 0
    for _ in range(samples):
        record = _diii_witness(n, rng) if label == ClassLabel.DIII else _complex_witness(label, n, rng)
        if record.max_lambda <= TRIVIAL_LAMBDA:
            skipped += 1
            _logger.warning("class %s: skipping trivial sample (max |lambda| = %.2e)", label.name, record.max_lambda)
            continue
        records.append(record)

    min_slack = min((r.slack for r in records), default=float("inf"))
    pairing = max((r.pairing_residual for r in records), default=0.0)
    trace = max((r.trace_residual for r in records), default=0.0)
    passed = bool(records) and min_slack > SLACK_TOL and pairing <= 1e-8 and trace <= 1e-8
    return WitnessReport(meo_class=label.name, n_modes=n, samples=samples, skipped=skipped,
                         min_slack=min_slack, max_pairing_residual=pairing, max_trace_residual=trace,
                         records=records, passed=passed)

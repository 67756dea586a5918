#!/bin/env python3
"""
Self-test battery: every Gaussian update checked against the exact Fock-space
simulator on random small instances, plus the symmetry table and the POVM
checks.
"""

import logging
from typing import Dict, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .config import SCHEMA_VERSION, RunConfig
from .fock import (anticommutation_residual, correlation_of, evolve_gaussian, fswap_generator, project_mode,
                   random_gaussian_state, weak_measure_mode, wick_residual)
from .gaussian import CorrelationMatrix, ModeVector, RandomStream, SingleParticleUnitary
from .povm import ADMISSIBLE, INADMISSIBLE, WitnessReport, povm_check_construction, povm_witness_inadmissible
from .symmetry import CorrespondenceReport, verify_table

_logger = logging.getLogger(__name__)

ORACLE_TOL = 1e-10
POVM_TOL = 1e-12
#outcomes below this probability are redirected to the other branch
OUTCOME_FLOOR = 1e-9

OPERATIONS = ("unitary", "projective", "weak", "fswap", "wick")


class OracleCase(BaseModel):
    model_config = ConfigDict(extra="forbid")

    index: int
    seed: List[int]
    operation: str
    n_modes: int
    residual: float
    probability_residual: float = 0.0
    redirected: bool = False
    passed: bool


class OracleReport(BaseModel):
    model_config = ConfigDict(extra="forbid")

    cases: int
    anticommutation_residual: float
    max_residual: float
    max_probability_residual: float
    redirected: int = 0
    failures: List[OracleCase] = Field(default_factory=list)
    passed: bool


class SelftestReport(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: str = SCHEMA_VERSION
    oracle: OracleReport
    symmetry: List[CorrespondenceReport] = Field(default_factory=list)
    povm_constructions: Dict[str, float] = Field(default_factory=dict)
    povm_witnesses: List[WitnessReport] = Field(default_factory=list)
    passed: bool


def _random_mode(n: int, rng: RandomStream) -> ModeVector:
    amps = rng.normal(n) + 1j * rng.normal(n)
    return ModeVector(n, amps, normalize=True)


def _orthogonal_pair(n: int, rng: RandomStream):
    a = _random_mode(n, rng).dense()
    b = rng.normal(n) + 1j * rng.normal(n)
    b = b - np.vdot(a, b) * a
    return ModeVector(n, a, normalize=True), ModeVector(n, b, normalize=True)


def _pick_outcome(probabilities: Dict[int, float], rng: RandomStream) -> Tuple[int, bool]:
    """Draw one of two outcomes evenly; returns (outcome, redirected)."""
    outcomes = sorted(probabilities)
    first = outcomes[int(rng.random() < 0.5)]
    if probabilities[first] >= OUTCOME_FLOOR:
        return first, False
    return (outcomes[0] if first == outcomes[1] else outcomes[1]), True


def run_oracle_case(index: int, seed: int, max_modes: int) -> OracleCase:
    """One random oracle comparison; the operation cycles through OPERATIONS."""
    rng = RandomStream(seed, key=(index,))
    operation = OPERATIONS[index % len(OPERATIONS)]
    n = int(2 + rng.choice(max_modes - 1, 1)[0])
    n_particles = int(rng.choice(n + 1, 1)[0])
    state = random_gaussian_state(n, n_particles, rng.generator)
    G = correlation_of(state)
    prob_residual = 0.0
    redirected = False

    if operation == "unitary":
        h = rng.normal((n, n)) + 1j * rng.normal((n, n))
        M = 0.5j * (h + h.conj().T)
        G.apply_unitary(SingleParticleUnitary.from_generator(M))
        reference = evolve_gaussian(state, M).normalized()
    elif operation == "projective":
        w = _random_mode(n, rng)
        p = G.occupation_expectation(w)
        outcome, redirected = _pick_outcome({0: 1.0 - p, 1: p}, rng)
        prob = G.project_occupation(w, outcome)
        reference, ref_prob = project_mode(state, w, outcome)
        prob_residual = abs(prob - ref_prob)
    elif operation == "weak":
        w = _random_mode(n, rng)
        kappa = float(rng.uniform(0.05, 3.0))
        p = G.occupation_expectation(w)
        p_plus, p_minus = CorrelationMatrix.weak_probabilities(p, kappa)
        outcome, redirected = _pick_outcome({-1: p_minus, 1: p_plus}, rng)
        prob = G.weak_update(w, kappa, outcome)
        reference, ref_prob = weak_measure_mode(state, w, kappa, outcome)
        prob_residual = abs(prob - ref_prob)
    elif operation == "fswap":
        w_a, w_b = _orthogonal_pair(n, rng)
        G.fswap(w_a, w_b)
        reference = evolve_gaussian(state, fswap_generator(w_a, w_b)).normalized()
    else:
        residual = wick_residual(state)
        return OracleCase(index=index, seed=[seed, index], operation=operation, n_modes=n,
                          residual=residual, passed=residual <= ORACLE_TOL)

    residual = float(np.max(np.abs(G.data - correlation_of(reference).data)))
    passed = residual <= ORACLE_TOL and prob_residual <= ORACLE_TOL
    return OracleCase(index=index, seed=[seed, index], operation=operation, n_modes=n,
                      residual=residual, probability_residual=prob_residual, redirected=redirected,
                      passed=passed)


def oracle_battery(cases: int, max_modes: int=4, seed: int=0) -> OracleReport:
    if max_modes < 2:
        raise ValueError(f"oracle cases need at least 2 modes, got {max_modes}")
    failures = []
    worst = worst_prob = 0.0
    redirected = 0
    for index in range(cases):
        case = run_oracle_case(index, seed, max_modes)
        worst = max(worst, case.residual)
        worst_prob = max(worst_prob, case.probability_residual)
        redirected += int(case.redirected)
        if not case.passed:
            _logger.warning("oracle case %d (%s, %d modes, seed %d) failed: residual %.3e",
                            index, case.operation, case.n_modes, seed, case.residual)
            failures.append(case)
    anticommutation = max(anticommutation_residual(n) for n in range(1, max_modes + 1))
    passed = not failures and anticommutation <= ORACLE_TOL
    if redirected:
        _logger.info("oracle battery: %d cases measured the likelier outcome instead of a branch below %.0e",
                     redirected, OUTCOME_FLOOR)
    _logger.info("oracle battery: %d cases, %d failures, max residual %.3e", cases, len(failures), worst)
    return OracleReport(cases=cases, anticommutation_residual=anticommutation, max_residual=worst,
                        max_probability_residual=worst_prob, redirected=redirected, failures=failures,
                        passed=passed)


def povm_constructions(alpha_param: float) -> Dict[str, float]:
    return {label.name: povm_check_construction(label, alpha_param) for label in ADMISSIBLE}


def povm_witnesses(n_modes: int, samples: int, seed: int) -> List[WitnessReport]:
    return [povm_witness_inadmissible(label, n_modes, samples, RandomStream(seed, key=(int(label),)))
            for label in INADMISSIBLE]


def selftest(config: RunConfig) -> SelftestReport:
    """Oracle battery, symmetry table and POVM checks with the configured sizes."""
    oracle = oracle_battery(config.selftest.cases, config.selftest.max_modes, config.selftest.seed)
    table = verify_table(config.symmetry.samples, RandomStream(config.symmetry.seed), config.symmetry.n)
    constructions = povm_constructions(config.povm.alpha_param)
    witnesses = povm_witnesses(config.povm.n_modes, config.povm.samples, config.povm.seed)

    passed = (oracle.passed and all(r.passed for r in table)
              and all(v <= POVM_TOL for v in constructions.values())
              and all(w.passed for w in witnesses))
    return SelftestReport(oracle=oracle, symmetry=table, povm_constructions=constructions,
                          povm_witnesses=witnesses, passed=passed)

#!/bin/env python3
"""
Adaptive measurement-and-feedforward steering on a bilayer lattice.

The physical layer holds modes c_{r,mu} at flat indices [0, 2L^2) and the
ancillary layer holds d_{r,nu} at [2L^2, 4L^2), with d_{r,nu} directly above
c_{r,nu}. One cycle measures every OW mode, swaps a particle in or out through
the paired ancilla when the outcome misses its target, scrambles the ancillary
layer with random hopping gates and collapses it by measuring every ancilla.
"""

import logging
from contextlib import contextmanager, nullcontext
from typing import Dict, List, Optional, Tuple

import joblib
import numpy as np
from joblib import Parallel, delayed, parallel_backend
from threadpoolctl import threadpool_limits
from tqdm import tqdm

from .chern_model import Band, Orbital, OWMode, OWModeSet
from .config import ProtocolConfig
from .errors import FermionSteerError, TrajectoryError
from .gaussian import CorrelationMatrix, ModeVector, RandomStream, SingleParticleUnitary
from .lattice import AlphaField, LatticeSpec
from .observables import (StripRegions, TripleRegionPartition, chern_real_space, correlation_decay,
                          mutual_information, ow_occupations)
from .report import CycleRecord, FinalSummary, TrajectoryFailure, TrajectoryReport

_logger = logging.getLogger(__name__)

CROSS_TOL = 1e-8
CHARGE_TOL = 1e-10

#stabilizer targets: lower-band OW modes filled, upper-band OW modes empty
TARGET_OCCUPATION = {Band.LOWER: 1, Band.UPPER: 0}


class BilayerState:
    def __init__(self, lattice: LatticeSpec, G: CorrelationMatrix, cycle: int=0):
        if G.dim != 2 * lattice.n_modes:
            raise ValueError(f"bilayer needs {2 * lattice.n_modes} modes, got {G.dim}")
        self._lattice = lattice
        self._G = G
        self._cycle = cycle

    @property
    def lattice(self) -> LatticeSpec:
        return self._lattice

    @property
    def G(self) -> CorrelationMatrix:
        return self._G

    @property
    def cycle(self) -> int:
        return self._cycle

    @cycle.setter
    def cycle(self, value: int) -> None:
        self._cycle = value

    @property
    def n_physical(self) -> int:
        return self._lattice.n_modes

    def ancilla_index(self, site: int, orbital: Orbital) -> int:
        return self._lattice.n_modes + 2 * site + int(orbital)

    def physical(self) -> CorrelationMatrix:
        n = self.n_physical
        return CorrelationMatrix(self._G.data[:n, :n], pure=self._G.pure, check=False)

    def ancilla(self) -> CorrelationMatrix:
        n = self.n_physical
        return CorrelationMatrix(self._G.data[n:, n:], check=False)

    def cross_residual(self) -> float:
        n = self.n_physical
        return float(np.max(np.abs(self._G.data[:n, n:])))

    def physical_charge(self) -> float:
        n = self.n_physical
        return float(np.real(np.trace(self._G.data[:n, :n])))

    def copy(self) -> "BilayerState":
        return BilayerState(self._lattice, self._G.copy(), self._cycle)


def init_bilayer(config: ProtocolConfig, rng: RandomStream) -> BilayerState:
    """Random product state with exactly Q particles over the 4 L^2 modes."""
    lattice = LatticeSpec(config.L)
    n_uc = lattice.n_cells
    Q = config.initial_charge
    if not n_uc < Q < 3 * n_uc:
        raise ValueError(f"initial charge {Q} outside ({n_uc}, {3 * n_uc})")
    dim = 2 * lattice.n_modes
    occupations = np.zeros(dim, dtype=int)
    occupations[rng.choice(dim, Q, replace=False)] = 1
    return BilayerState(lattice, CorrelationMatrix.product_state(dim, occupations))


def embed_physical(state: BilayerState, w: ModeVector) -> ModeVector:
    if w.dim == state.G.dim:
        return w
    return w.embed(state.G.dim)


def step_measure_feedforward(state: BilayerState, mode: OWMode, ancilla_index: int,
                             rng: RandomStream) -> Tuple[int, bool]:
    """
    Measure the occupation of `mode` and, if it misses the stabilizer target,
    exchange it with the ancilla mode. Returns (outcome, swapped).
    """
    w = embed_physical(state, mode.wavefunction)
    outcome, _ = state.G.measure_occupation(w, rng)
    if outcome == TARGET_OCCUPATION[mode.band]:
        return outcome, False
    state.G.fswap(w, ModeVector.basis(state.G.dim, ancilla_index))
    return outcome, True


def hopping_gate(theta: float) -> np.ndarray:
    """exp(i theta (d^dag d' + h.c.)) on the pair (d, d')."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, 1j * s], [1j * s, c]], dtype=np.complex128)


def ancilla_redistribute(state: BilayerState, rng: RandomStream) -> None:
    """
    Random nearest-neighbour hopping between ancillary cells (angle theta_r on
    the x and y bonds leaving r, both orbitals), then on-site A-B mixing with
    theta'_r, then a projective measurement of every ancilla occupation.
    """
    lattice = state.lattice
    n_cells = lattice.n_cells
    theta = rng.uniform(0.0, 2.0 * np.pi, n_cells)
    theta_onsite = rng.uniform(0.0, 2.0 * np.pi, n_cells)
    G = state.G

    for site in range(n_cells):
        x, y = lattice.site_coords(site)
        gate = hopping_gate(theta[site])
        for neighbour in (lattice.site_index(x + 1, y), lattice.site_index(x, y + 1)):
            if neighbour == site:
                continue
            for orbital in Orbital:
                support = [state.ancilla_index(site, orbital), state.ancilla_index(neighbour, orbital)]
                G.apply_unitary(SingleParticleUnitary(gate, support=support, check=False))
    for site in range(n_cells):
        support = [state.ancilla_index(site, Orbital.A), state.ancilla_index(site, Orbital.B)]
        G.apply_unitary(SingleParticleUnitary(hopping_gate(theta_onsite[site]), support=support, check=False))

    for index in range(state.n_physical, G.dim):
        G.measure_occupation(ModeVector.basis(G.dim, index), rng)


def apply_noise(state: BilayerState, sigma: float, rng: RandomStream) -> None:
    """
    Independent U(1) rotations exp(4 pi i theta (n - 1/2)), theta ~ U[0, sigma),
    on every physical mode.
    """
    if not 0.0 <= sigma <= 1.0:
        raise ValueError(f"noise strength must lie in [0, 1], got {sigma}")
    if sigma == 0.0:
        return
    theta = rng.uniform(0.0, sigma, state.n_physical)
    phases = np.ones(state.G.dim, dtype=np.complex128)
    phases[:state.n_physical] = np.exp(4.0j * np.pi * theta)
    state.G.data[...] = state.G.data * np.outer(phases.conj(), phases)


def sweep_order(lattice: LatticeSpec, rng: RandomStream, shuffle: bool) -> np.ndarray:
    if shuffle:
        return rng.permutation(lattice.n_cells)
    return np.arange(lattice.n_cells)


def run_cycle(state: BilayerState, modes: OWModeSet, config: ProtocolConfig, rng: RandomStream) -> Dict[str, int]:
    """
    One full cycle; returns counts of measurements and of fired swaps.
    """
    charge_before = state.G.total_charge()
    swaps = 0
    measured = 0
    for site in sweep_order(state.lattice, rng, config.shuffle_sweep):
        for orbital in Orbital:
            ancilla = state.ancilla_index(site, orbital)
            for band in (Band.LOWER, Band.UPPER):
                _, fired = step_measure_feedforward(state, modes.get(site, orbital, band), ancilla, rng)
                swaps += int(fired)
                measured += 1
    ancilla_redistribute(state, rng)
    apply_noise(state, config.noise_sigma, rng)
    state.G.sanitize()
    state.cycle += 1

    drift = abs(state.G.total_charge() - charge_before)
    cross = state.cross_residual()
    _logger.debug("cycle %d: %d swaps, charge drift %.3e, cross-layer residual %.3e",
                  state.cycle, swaps, drift, cross)
    if cross > CROSS_TOL:
        _logger.warning("cycle %d: cross-layer correlations %.3e above %.0e", state.cycle, cross, CROSS_TOL)
    return {"measured": measured, "swaps": swaps}


class TrajectoryOutcome:
    """Report of one trajectory together with its physical correlation matrices."""
    def __init__(self, report: TrajectoryReport, final_physical: np.ndarray,
                 snapshots: Dict[int, np.ndarray]):
        self._report = report
        self._final_physical = final_physical
        self._snapshots = snapshots

    @property
    def report(self) -> TrajectoryReport:
        return self._report

    @property
    def final_physical(self) -> np.ndarray:
        return self._final_physical

    @property
    def snapshots(self) -> Dict[int, np.ndarray]:
        return self._snapshots


def observe(state: BilayerState, modes: OWModeSet, config: ProtocolConfig,
            partition: TripleRegionPartition, strips: StripRegions) -> CycleRecord:
    physical = state.physical()
    wanted = set(config.observables)
    record = CycleRecord(cycle=state.cycle)
    if "charge" in wanted:
        record.charge = state.G.total_charge()
    if "purity" in wanted:
        record.purity_deviation = physical.purity_deviation()
        record.cross_residual = state.cross_residual()
    if "chern" in wanted:
        record.chern = chern_real_space(physical, partition, config.chern_self_average)
    if "mutual_information" in wanted:
        record.mutual_information = mutual_information(physical, strips)
    if "ow_occupation" in wanted:
        record.ow_occupation = ow_occupations(physical, modes)
    if "correlation" in wanted:
        record.correlation = correlation_decay(physical, state.lattice).tolist()
    return record


def run_trajectory(config: ProtocolConfig, index: int=0, modes: OWModeSet=None,
                   field: AlphaField=None) -> TrajectoryOutcome:
    lattice = LatticeSpec(config.L)
    if field is None:
        field = AlphaField.uniform(lattice, config.alpha)
    if modes is None:
        modes = OWModeSet.build(field, config.n_shell, config.tau)
    rng = RandomStream.for_trajectory(config.seed, index)
    partition = TripleRegionPartition(lattice)
    strips = StripRegions(lattice)

    state = init_bilayer(config, rng)
    charge0 = state.G.total_charge()
    snapshots = {}
    records = [observe(state, modes, config, partition, strips)]
    if 0 in config.snapshot_cycles:
        snapshots[0] = state.physical().data.copy()
    for _ in range(config.cycles):
        run_cycle(state, modes, config, rng)
        if state.cycle % config.observe_every == 0 or state.cycle == config.cycles:
            records.append(observe(state, modes, config, partition, strips))
        if state.cycle in config.snapshot_cycles:
            snapshots[state.cycle] = state.physical().data.copy()

    physical = state.physical()
    final = FinalSummary(
        chern=chern_real_space(physical, partition, config.chern_self_average),
        mutual_information=mutual_information(physical, strips),
        purity_deviation=physical.purity_deviation(),
        charge_drift=abs(state.G.total_charge() - charge0),
        correlation=correlation_decay(physical, lattice).tolist(),
    )
    if final.charge_drift > CHARGE_TOL:
        _logger.warning("trajectory %d: charge drift %.3e", index, final.charge_drift)
    report = TrajectoryReport(index=index, seed=[config.seed, index], initial_charge=config.initial_charge,
                              rng_draws=rng.counter, cycles=records, final=final)
    return TrajectoryOutcome(report, physical.data.copy(), snapshots)


class _TqdmBatchCompletionCallback(joblib.parallel.BatchCompletionCallBack):
    """Update tqdm whenever a joblib batch finishes."""
    def __init__(self, tqdm_object, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.tqdm_object = tqdm_object

    def __call__(self, *args, **kwargs):
        self.tqdm_object.update(n=self.batch_size)
        return super().__call__(*args, **kwargs)


@contextmanager
def tqdm_joblib(tqdm_object):
    """Context manager linking joblib's callback to a tqdm progress bar."""
    original_callback = joblib.parallel.BatchCompletionCallBack
    joblib.parallel.BatchCompletionCallBack = lambda *args, **kwargs: _TqdmBatchCompletionCallback(tqdm_object, *args, **kwargs)
    try:
        with tqdm_object as pbar:
            yield pbar
    finally:
        joblib.parallel.BatchCompletionCallBack = original_callback


def _trajectory_worker(config: ProtocolConfig, index: int, modes: OWModeSet, field: AlphaField):
    #keep BLAS single-threaded inside each worker
    with threadpool_limits(limits=1):
        try:
            return run_trajectory(config, index, modes, field)
        except (FermionSteerError, ArithmeticError, ValueError, np.linalg.LinAlgError) as e:
            return TrajectoryError(index, config.seed, f"{type(e).__name__}: {e}")


class EnsembleResult:
    """
    Trajectory outcomes of an ensemble, reduced in trajectory-index order:
    the averaged physical correlation matrix and averaged snapshots.
    """
    def __init__(self, config: ProtocolConfig):
        self._config = config
        self._reports: List[TrajectoryReport] = []
        self._failures: List[TrajectoryFailure] = []
        self._G_sum: Optional[np.ndarray] = None
        self._snapshot_sums: Dict[int, np.ndarray] = {}
        self._count = 0

    @property
    def config(self) -> ProtocolConfig:
        return self._config

    @property
    def reports(self) -> List[TrajectoryReport]:
        return self._reports

    @property
    def failures(self) -> List[TrajectoryFailure]:
        return self._failures

    @property
    def completed(self) -> int:
        return self._count

    def add(self, outcome) -> None:
        if isinstance(outcome, TrajectoryError):
            _logger.warning("%s", outcome)
            self._failures.append(TrajectoryFailure(index=outcome.index, seed=[outcome.seed, outcome.index],
                                                    error=outcome.cause))
            return
        self._reports.append(outcome.report)
        if self._G_sum is None:
            self._G_sum = outcome.final_physical.copy()
        else:
            self._G_sum += outcome.final_physical
        for cycle, G in sorted(outcome.snapshots.items()):
            if cycle in self._snapshot_sums:
                self._snapshot_sums[cycle] += G
            else:
                self._snapshot_sums[cycle] = G.copy()
        self._count += 1

    def averaged(self) -> Optional[CorrelationMatrix]:
        if self._count == 0:
            return None
        return CorrelationMatrix(self._G_sum / self._count, check=False)

    def averaged_snapshots(self) -> Dict[int, CorrelationMatrix]:
        return {c: CorrelationMatrix(G / self._count, check=False) for c, G in sorted(self._snapshot_sums.items())}


def run_ensemble(config: ProtocolConfig, n_jobs: int=1, progress: bool=True, modes: OWModeSet=None,
                 field: AlphaField=None, desc: str="trajectories") -> EnsembleResult:
    """
    Run `config.trajectories` independent trajectories. Per-trajectory seeds
    derive from (seed, index), so results do not depend on n_jobs.
    """
    lattice = LatticeSpec(config.L)
    if field is None:
        field = AlphaField.uniform(lattice, config.alpha)
    if modes is None:
        modes = OWModeSet.build(field, config.n_shell, config.tau)

    result = EnsembleResult(config)
    total = config.trajectories
    batch = max(1, 2 * n_jobs)
    _logger.info("running %d trajectories on %r with %d workers", total, lattice, n_jobs)

    ctx = tqdm_joblib(tqdm(total=total, desc=desc, unit="traj")) if progress and total > 1 else nullcontext()
    with ctx:
        for start in range(0, total, batch):
            indices = range(start, min(start + batch, total))
            if n_jobs > 1:
                with parallel_backend("loky", n_jobs=n_jobs, inner_max_num_threads=1):
                    outcomes = Parallel(n_jobs=n_jobs)(
                        delayed(_trajectory_worker)(config, i, modes, field) for i in indices
                    )
            else:
                outcomes = Parallel(n_jobs=1)(
                    delayed(_trajectory_worker)(config, i, modes, field) for i in indices
                )
            #Parallel returns outcomes in submission order
            for outcome in outcomes:
                result.add(outcome)

    if result.failures:
        _logger.warning("%d of %d trajectories failed", len(result.failures), total)
    return result

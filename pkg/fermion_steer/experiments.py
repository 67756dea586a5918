#!/bin/env python3
"""
Experiment runners. Each runner writes its artifacts through an
ArtifactWriter and returns an ExperimentOutcome; `run` dispatches on the
experiment kind and always leaves a manifest behind.
"""

import logging
import time
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from scipy.stats import linregress

from .chern_model import OWModeSet, ground_state_correlation_field
from .config import ProtocolConfig, RunConfig
from .errors import GapClosedError
from .gaussian import RandomStream
from .lattice import AlphaField, LatticeSpec, default_half_width, domain_wall_strips
from .lindblad import BandOccupations, LindbladParams, integrate, summarize
from .observables import (StripRegions, TripleRegionPartition, chern_marker, correlation_decay,
                          entanglement_contour, fit_decay, marker_column_average, regularized_chern,
                          spectral_gap)
from .ow_serializer import cached_mode_set
from .protocol import EnsembleResult, run_ensemble
from .report import (ArtifactWriter, AveragedSummary, DomainWallReport, DomainWallSnapshot, EnsembleCycleRow,
                     EnsembleReport, Manifest, SweepPoint, SweepReport, content_hash, cycle_rows_csv,
                     load_report)
from .selftest import oracle_battery, povm_constructions, povm_witnesses, selftest
from .symmetry import verify_table

_logger = logging.getLogger(__name__)

BOUND_TOL = 1e-9
POVM_TOL = 1e-12
CONTOUR_RATE_WINDOW = (4, 10)

#run-environment keys that do not change results
_ENVIRONMENT_KEYS = ("output_dir", "threads", "progress", "fixture_path", "mode_cache")


class ExperimentOutcome:
    def __init__(self, exit_status: int=0, completed: List[int]=None, failed: List[int]=None):
        self._exit_status = exit_status
        self._completed = list(completed) if completed else []
        self._failed = list(failed) if failed else []

    @property
    def exit_status(self) -> int:
        return self._exit_status

    @exit_status.setter
    def exit_status(self, value: int) -> None:
        self._exit_status = value

    @property
    def completed(self) -> List[int]:
        return self._completed

    @property
    def failed(self) -> List[int]:
        return self._failed


def report_echo(config: RunConfig) -> Dict[str, Any]:
    """Config echo embedded in reports, without the run-environment settings."""
    echo = config.echo()
    for key in _ENVIRONMENT_KEYS:
        echo.pop(key, None)
    return echo


def _try_fit(C, L: int):
    try:
        return fit_decay(C, L)
    except ValueError as e:
        _logger.warning("decay fit skipped: %s", e)
        return None


def ensemble_rows(reports) -> List[EnsembleCycleRow]:
    """Per-cycle means over trajectories, in cycle order."""
    by_cycle = {}
    for report in reports:
        for record in report.cycles:
            by_cycle.setdefault(record.cycle, []).append(record)
    rows = []
    for cycle in sorted(by_cycle):
        records = by_cycle[cycle]
        cherns = [r.chern for r in records if r.chern is not None]
        infos = [r.mutual_information for r in records if r.mutual_information is not None]
        purities = [r.purity_deviation for r in records if r.purity_deviation is not None]
        occupations = [r.ow_occupation for r in records if r.ow_occupation is not None]
        row = EnsembleCycleRow(cycle=cycle, samples=len(records))
        if cherns:
            row.chern_mean = float(np.mean(cherns))
            row.chern_std = float(np.std(cherns))
        if infos:
            row.mutual_information_mean = float(np.mean(infos))
        if purities:
            row.purity_deviation_max = float(np.max(purities))
        if occupations:
            row.ow_occupation_mean = {k: float(np.mean([o[k] for o in occupations])) for k in sorted(occupations[0])}
        rows.append(row)
    return rows


def summarize_averaged(result: EnsembleResult, lattice: LatticeSpec,
                       self_average: bool=False) -> Optional[AveragedSummary]:
    """Spectral gap, regularized Chern number and correlation decay of the averaged state."""
    G = result.averaged()
    if G is None:
        return None
    partition = TripleRegionPartition(lattice)
    regularized = None
    error = None
    try:
        regularized = regularized_chern(G, partition, self_average)
    except GapClosedError as e:
        error = str(e)
        _logger.warning("regularized Chern number undefined: %s", e)

    corr = correlation_decay(G, lattice)
    resolved = np.mean([r.final.correlation for r in result.reports], axis=0)
    return AveragedSummary(
        spectral_gap=spectral_gap(G), regularized_chern=regularized, regularization_error=error,
        correlation=corr.tolist(), decay_fit=_try_fit(corr, lattice.L),
        resolved_correlation=resolved.tolist(), resolved_decay_fit=_try_fit(resolved, lattice.L),
    )


def build_ensemble_report(config: RunConfig, protocol: ProtocolConfig, result: EnsembleResult) -> EnsembleReport:
    lattice = LatticeSpec(protocol.L)
    echo = report_echo(config)
    return EnsembleReport(
        experiment=config.experiment, config=echo, config_hash=content_hash(echo), master_seed=protocol.seed,
        strips=StripRegions(lattice).describe(), rows=ensemble_rows(result.reports),
        averaged=summarize_averaged(result, lattice, protocol.chern_self_average),
        trajectories=result.reports, failures=result.failures,
    )


def write_ensemble_artifacts(writer: ArtifactWriter, report: EnsembleReport, prefix: str="") -> None:
    writer.write_model(f"{prefix}report.json", report)
    header, rows = cycle_rows_csv(report.rows)
    writer.write_csv(f"{prefix}cycles.csv", header, rows)
    writer.write_csv(f"{prefix}trajectories.csv",
                     ["index", "chern", "mutual_information", "purity_deviation", "charge_drift", "rng_draws"],
                     [[t.index, t.final.chern, t.final.mutual_information, t.final.purity_deviation,
                       t.final.charge_drift, t.rng_draws] for t in report.trajectories])
    if report.averaged is not None:
        averaged = report.averaged
        writer.write_csv(f"{prefix}correlation.csv", ["r", "averaged", "resolved"],
                         [[r, a, b] for r, (a, b) in enumerate(zip(averaged.correlation,
                                                                   averaged.resolved_correlation))])


def compare_fixture(report: EnsembleReport, path: str) -> bool:
    """True when the per-cycle rows, averaged summary and trajectories equal the stored report."""
    fixture = load_report(path)
    keys = ("rows", "averaged", "trajectories")
    ours = report.model_dump(mode="json", include=set(keys))
    theirs = fixture.model_dump(mode="json", include=set(keys))
    for key in keys:
        if ours[key] != theirs[key]:
            _logger.error("report differs from fixture %s in %r", path, key)
            return False
    return True


def _ensemble_outcome(result: EnsembleResult) -> ExperimentOutcome:
    completed = [r.index for r in result.reports]
    failed = [f.index for f in result.failures]
    return ExperimentOutcome(1 if failed else 0, completed, failed)


def ensemble_modes(config: RunConfig, protocol: ProtocolConfig, field: AlphaField=None) -> OWModeSet:
    if field is None:
        field = AlphaField.uniform(LatticeSpec(protocol.L), protocol.alpha)
    return cached_mode_set(field, protocol.n_shell, protocol.tau, config.mode_cache)


def run_steer(config: RunConfig, writer: ArtifactWriter, n_jobs: int=1) -> ExperimentOutcome:
    protocol = config.protocol
    result = run_ensemble(protocol, n_jobs=n_jobs, progress=config.progress,
                          modes=ensemble_modes(config, protocol), desc="steer")
    report = build_ensemble_report(config, protocol, result)
    write_ensemble_artifacts(writer, report)
    outcome = _ensemble_outcome(result)
    if config.fixture_path is not None and not compare_fixture(report, config.fixture_path):
        outcome.exit_status = 1
    return outcome


def _sweep_point(value: float, result: EnsembleResult, lattice: LatticeSpec,
                 self_average: bool) -> SweepPoint:
    cherns = [r.final.chern for r in result.reports]
    infos = [r.final.mutual_information for r in result.reports]
    point = SweepPoint(value=value, completed=result.completed, failed=len(result.failures))
    if cherns:
        point.chern_mean = float(np.mean(cherns))
        point.chern_std = float(np.std(cherns))
        point.mutual_information_mean = float(np.mean(infos))
        point.averaged = summarize_averaged(result, lattice, self_average)
    return point


def _sweep_csv_row(point: SweepPoint) -> list:
    averaged = point.averaged
    fit = averaged.resolved_decay_fit if averaged is not None else None
    return [
        point.value, point.completed, point.failed, point.chern_mean, point.chern_std,
        point.mutual_information_mean,
        averaged.spectral_gap if averaged else None,
        averaged.regularized_chern if averaged else None,
        fit.exponential.r_squared if fit else None, fit.exponential.aic if fit else None,
        fit.power_law.r_squared if fit else None, fit.power_law.aic if fit else None,
        fit.preferred if fit else None,
    ]


SWEEP_HEADER = ["value", "completed", "failed", "chern_mean", "chern_std", "mutual_information_mean",
                "spectral_gap", "regularized_chern", "exp_r_squared", "exp_aic", "power_r_squared",
                "power_aic", "preferred_decay"]


def run_sweep(config: RunConfig, writer: ArtifactWriter, n_jobs: int, parameter: str) -> ExperimentOutcome:
    """Ensemble per value of alpha ('alpha') or of the noise strength ('noise_sigma')."""
    values = config.sweep.alphas if parameter == "alpha" else config.sweep.sigmas
    lattice = LatticeSpec(config.protocol.L)
    echo = report_echo(config)
    report = SweepReport(experiment=config.experiment, parameter=parameter, config=echo,
                         config_hash=content_hash(echo), master_seed=config.protocol.seed)
    outcome = ExperimentOutcome()
    for value in values:
        protocol = config.protocol.model_copy(update={parameter: float(value)})
        _logger.info("%s = %g", parameter, value)
        result = run_ensemble(protocol, n_jobs=n_jobs, progress=config.progress,
                              modes=ensemble_modes(config, protocol), desc=f"{parameter}={value:g}")
        report.points.append(_sweep_point(float(value), result, lattice, protocol.chern_self_average))
        header, rows = cycle_rows_csv(ensemble_rows(result.reports))
        writer.write_csv(f"{parameter}_{value:g}/cycles.csv", header, rows)
        outcome.completed.extend(r.index for r in result.reports)
        outcome.failed.extend(f.index for f in result.failures)
        if result.failures:
            outcome.exit_status = 1
    writer.write_model("sweep.json", report)
    writer.write_csv("sweep.csv", SWEEP_HEADER, [_sweep_csv_row(p) for p in report.points])
    return outcome


def _field_rows(field: np.ndarray) -> list:
    L = field.shape[0]
    return [[x, y, float(field[x, y])] for y in range(L) for x in range(L)]


def _strip_integral(field: np.ndarray, columns) -> float:
    return float(np.sum(field[np.asarray(columns), :]))


def _contour_rates(snapshots: List[DomainWallSnapshot]) -> Dict[str, Optional[float]]:
    """Fitted e-folding rates (per cycle) of the strip contours over CONTOUR_RATE_WINDOW."""
    low, high = CONTOUR_RATE_WINDOW
    rates = {}
    for key in ("walls", "inside", "outside"):
        points = [(s.cycle, getattr(s, f"contour_{key}")) for s in snapshots
                  if low <= s.cycle <= high and getattr(s, f"contour_{key}") > 0.0]
        if len(points) < 2:
            rates[key] = None
            continue
        cycles, values = zip(*points)
        rates[key] = float(-linregress(cycles, np.log(values)).slope)
    return rates


def run_domain_wall(config: RunConfig, writer: ArtifactWriter, n_jobs: int=1) -> ExperimentOutcome:
    """
    Steer a slab of alpha_in inside an alpha_out background and record the
    Chern marker and entanglement contour of the averaged state at the
    snapshot cycles.
    """
    dw = config.domain_wall
    lattice = LatticeSpec(config.protocol.L)
    half_width = dw.half_width if dw.half_width is not None else default_half_width(lattice)
    field = AlphaField.domain_wall(lattice, dw.alpha_in, dw.alpha_out, half_width)
    cycles = config.protocol.cycles
    snapshots = sorted(c for c in dw.snapshot_cycles if 0 <= c <= cycles)
    protocol = ProtocolConfig.model_validate({**config.protocol.model_dump(), "snapshot_cycles": snapshots})
    strips = domain_wall_strips(lattice, half_width)
    empty = [k for k, v in strips.items() if v.size == 0]
    if empty:
        raise ValueError(f"L = {lattice.L} with half width {half_width} leaves no {' or '.join(empty)} columns")

    reference = chern_marker(ground_state_correlation_field(field), lattice)
    writer.write_csv("marker_reference.csv", ["x", "y", "marker"], _field_rows(reference))

    result = run_ensemble(protocol, n_jobs=n_jobs, progress=config.progress, field=field,
                          modes=ensemble_modes(config, protocol, field), desc="domain-wall")
    records = []
    for cycle, G in result.averaged_snapshots().items():
        marker = chern_marker(G, lattice)
        contour = entanglement_contour(G, lattice)
        writer.write_csv(f"marker_c{cycle:03d}.csv", ["x", "y", "marker"], _field_rows(marker))
        writer.write_csv(f"contour_c{cycle:03d}.csv", ["x", "y", "contour"], _field_rows(contour))
        records.append(DomainWallSnapshot(
            cycle=cycle,
            marker_inside=marker_column_average(marker, strips["inside"]),
            marker_outside=marker_column_average(marker, strips["outside"]),
            contour_walls=_strip_integral(contour, strips["walls"]),
            contour_inside=_strip_integral(contour, strips["inside"]),
            contour_outside=_strip_integral(contour, strips["outside"]),
            spectral_gap=spectral_gap(G),
        ))

    echo = report_echo(config)
    report = DomainWallReport(
        config=echo, config_hash=content_hash(echo), master_seed=protocol.seed,
        columns={k: v.tolist() for k, v in strips.items()},
        reference_marker_inside=marker_column_average(reference, strips["inside"]),
        reference_marker_outside=marker_column_average(reference, strips["outside"]),
        snapshots=records, contour_rates=_contour_rates(records),
        completed=result.completed, failed=len(result.failures),
    )
    writer.write_model("domain_wall.json", report)
    writer.write_csv("domain_wall.csv",
                     ["cycle", "marker_inside", "marker_outside", "contour_walls", "contour_inside",
                      "contour_outside", "spectral_gap"],
                     [[s.cycle, s.marker_inside, s.marker_outside, s.contour_walls, s.contour_inside,
                       s.contour_outside, s.spectral_gap] for s in records])
    header, rows = cycle_rows_csv(ensemble_rows(result.reports))
    writer.write_csv("cycles.csv", header, rows)
    return _ensemble_outcome(result)


def run_lindblad(config: RunConfig, writer: ArtifactWriter, n_jobs: int=1) -> ExperimentOutcome:
    cfg = config.lindblad
    params = LindbladParams.from_config(cfg)
    initial = BandOccupations.uniform(params.lattice, cfg.initial_upper, cfg.initial_lower, cfg.initial_coherence)
    series = integrate(params, initial, cfg.record_every)
    summary = summarize(series, params)
    writer.write_csv("lindblad.csv", ["t", "upper", "lower", "coherence_max"], series.rows())
    echo = report_echo(config)
    writer.write_json("lindblad.json", {
        "schema_version": config.schema_version, "experiment": config.experiment,
        "config_hash": content_hash(echo), "result": summary.model_dump(mode="json"),
    })
    ok = summary.upper_bound_violation <= BOUND_TOL and summary.lower_bound_violation <= BOUND_TOL
    if not ok:
        _logger.error("exponential bounds violated: upper %.3e, lower %.3e",
                      summary.upper_bound_violation, summary.lower_bound_violation)
    return ExperimentOutcome(0 if ok else 1)


def run_symmetry(config: RunConfig, writer: ArtifactWriter, n_jobs: int=1) -> ExperimentOutcome:
    cfg = config.symmetry
    rows = verify_table(cfg.samples, RandomStream(cfg.seed), cfg.n)
    writer.write_json("symmetry.json", {"schema_version": config.schema_version,
                                        "rows": [r.model_dump(mode="json") for r in rows]})
    writer.write_csv("symmetry.csv",
                     ["stm_class", "meo_partner", "algebra_residual", "group_residual", "closure_residual",
                      "partner_residual", "min_excluded_residual", "passed"],
                     [[r.stm_class, r.meo_partner, r.algebra_residual, r.group_residual, r.closure_residual,
                       r.partner_residual, min(r.excluded_classes.values(), default=None), r.passed]
                      for r in rows])
    return ExperimentOutcome(0 if all(r.passed for r in rows) else 1)


def run_povm(config: RunConfig, writer: ArtifactWriter, n_jobs: int=1) -> ExperimentOutcome:
    cfg = config.povm
    constructions = povm_constructions(cfg.alpha_param)
    witnesses = povm_witnesses(cfg.n_modes, cfg.samples, cfg.seed)
    writer.write_json("povm.json", {
        "schema_version": config.schema_version,
        "constructions": constructions,
        "witnesses": [w.model_dump(mode="json", exclude={"records"}) for w in witnesses],
    })
    writer.write_csv("povm.csv", ["class", "kind", "residual", "min_slack", "skipped", "passed"],
                     [[k, "construction", v, None, None, v <= POVM_TOL] for k, v in constructions.items()]
                     + [[w.meo_class, "witness", max(w.max_pairing_residual, w.max_trace_residual),
                         w.min_slack, w.skipped, w.passed] for w in witnesses])
    ok = all(v <= POVM_TOL for v in constructions.values()) and all(w.passed for w in witnesses)
    return ExperimentOutcome(0 if ok else 1)


def run_oracle_selftest(config: RunConfig, writer: ArtifactWriter, n_jobs: int=1) -> ExperimentOutcome:
    cfg = config.selftest
    report = oracle_battery(cfg.cases, cfg.max_modes, cfg.seed)
    writer.write_model("oracle.json", report)
    return ExperimentOutcome(0 if report.passed else 1)


def run_selftest(config: RunConfig, writer: ArtifactWriter, n_jobs: int=1) -> ExperimentOutcome:
    report = selftest(config)
    writer.write_model("selftest.json", report)
    if not report.passed:
        for case in report.oracle.failures:
            _logger.error("oracle failure: case %d (%s), seed %s", case.index, case.operation, case.seed)
    return ExperimentOutcome(0 if report.passed else 1)


RUNNERS: Dict[str, Callable[[RunConfig, ArtifactWriter, int], ExperimentOutcome]] = {
    "steer": run_steer,
    "alpha-sweep": lambda config, writer, n_jobs=1: run_sweep(config, writer, n_jobs, "alpha"),
    "noise-sweep": lambda config, writer, n_jobs=1: run_sweep(config, writer, n_jobs, "noise_sigma"),
    "domain-wall": run_domain_wall,
    "lindblad": run_lindblad,
    "symmetry": run_symmetry,
    "povm": run_povm,
    "oracle-selftest": run_oracle_selftest,
    "selftest": run_selftest,
}


def run(config: RunConfig, n_jobs: int=1) -> int:
    """
    Run the configured experiment and write the manifest, also when the
    experiment raises. Returns the exit status.
    """
    writer = ArtifactWriter(config.output_dir)
    writer.write_json("config.json", config.echo())
    _logger.info("experiment %s -> %s", config.experiment, writer.root)
    start = time.perf_counter()
    outcome = ExperimentOutcome(exit_status=1)
    try:
        outcome = RUNNERS[config.experiment](config, writer, n_jobs)
    finally:
        manifest = Manifest(experiment=config.experiment, config_hash=content_hash(report_echo(config)),
                            exit_status=outcome.exit_status, completed_trajectories=outcome.completed,
                            failed_trajectories=outcome.failed,
                            wall_time_seconds=time.perf_counter() - start)
        writer.write_manifest(manifest)
    _logger.info("experiment %s finished with status %d", config.experiment, outcome.exit_status)
    return outcome.exit_status

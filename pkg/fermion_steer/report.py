#!/bin/env python3
"""
Report records and their JSON / CSV writers.
"""

import csv
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from pydantic import BaseModel, ConfigDict, Field

from .config import SCHEMA_VERSION, check_schema_version
from .observables import DecayFit

_logger = logging.getLogger(__name__)


def content_hash(payload: Dict[str, Any]) -> str:
    """sha256 of the canonical JSON form of `payload`."""
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class CycleRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    cycle: int
    charge: Optional[float] = None
    purity_deviation: Optional[float] = None
    cross_residual: Optional[float] = None
    chern: Optional[float] = None
    mutual_information: Optional[float] = None
    ow_occupation: Optional[Dict[str, float]] = None
    correlation: Optional[List[float]] = None


class FinalSummary(BaseModel):
    model_config = ConfigDict(extra="forbid")

    chern: float
    mutual_information: float
    purity_deviation: float
    charge_drift: float
    correlation: List[float]


class TrajectoryReport(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: str = SCHEMA_VERSION
    index: int
    seed: List[int]
    initial_charge: int
    rng_draws: int
    cycles: List[CycleRecord] = Field(default_factory=list)
    final: Optional[FinalSummary] = None


class TrajectoryFailure(BaseModel):
    model_config = ConfigDict(extra="forbid")

    index: int
    seed: List[int]
    error: str


class EnsembleCycleRow(BaseModel):
    model_config = ConfigDict(extra="forbid")

    cycle: int
    samples: int
    chern_mean: Optional[float] = None
    chern_std: Optional[float] = None
    mutual_information_mean: Optional[float] = None
    purity_deviation_max: Optional[float] = None
    ow_occupation_mean: Optional[Dict[str, float]] = None


class AveragedSummary(BaseModel):
    """Quantities of the trajectory-averaged correlation matrix."""
    model_config = ConfigDict(extra="forbid")

    spectral_gap: float
    regularized_chern: Optional[float] = None
    regularization_error: Optional[str] = None
    correlation: List[float]
    decay_fit: Optional[DecayFit] = None
    resolved_correlation: List[float]
    resolved_decay_fit: Optional[DecayFit] = None


class EnsembleReport(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: str = SCHEMA_VERSION
    experiment: str
    config: Dict[str, Any]
    config_hash: str
    master_seed: int
    strips: Dict[str, List[int]]
    rows: List[EnsembleCycleRow] = Field(default_factory=list)
    averaged: Optional[AveragedSummary] = None
    trajectories: List[TrajectoryReport] = Field(default_factory=list)
    failures: List[TrajectoryFailure] = Field(default_factory=list)


class Manifest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: str = SCHEMA_VERSION
    experiment: str
    config_hash: str
    exit_status: int
    artifacts: List[str] = Field(default_factory=list)
    completed_trajectories: List[int] = Field(default_factory=list)
    failed_trajectories: List[int] = Field(default_factory=list)
    wall_time_seconds: float = 0.0


class SweepPoint(BaseModel):
    """Ensemble summary at one value of the swept parameter."""
    model_config = ConfigDict(extra="forbid")

    value: float
    completed: int
    failed: int
    chern_mean: Optional[float] = None
    chern_std: Optional[float] = None
    mutual_information_mean: Optional[float] = None
    averaged: Optional[AveragedSummary] = None


class SweepReport(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: str = SCHEMA_VERSION
    experiment: str
    parameter: str
    config: Dict[str, Any]
    config_hash: str
    master_seed: int
    points: List[SweepPoint] = Field(default_factory=list)


class DomainWallSnapshot(BaseModel):
    model_config = ConfigDict(extra="forbid")

    cycle: int
    marker_inside: float
    marker_outside: float
    contour_walls: float
    contour_inside: float
    contour_outside: float
    spectral_gap: float


class DomainWallReport(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: str = SCHEMA_VERSION
    experiment: str = "domain-wall"
    config: Dict[str, Any]
    config_hash: str
    master_seed: int
    columns: Dict[str, List[int]]
    reference_marker_inside: float
    reference_marker_outside: float
    snapshots: List[DomainWallSnapshot] = Field(default_factory=list)
    contour_rates: Dict[str, Optional[float]] = Field(default_factory=dict)
    completed: int
    failed: int


class ArtifactWriter:
    """
    Writes artifacts under one output directory and remembers their names for
    the manifest.
    """
    def __init__(self, output_dir: str):
        self._root = Path(output_dir)
        self._root.mkdir(parents=True, exist_ok=True)
        self._artifacts = []

    @property
    def root(self) -> Path:
        return self._root

    @property
    def artifacts(self) -> List[str]:
        return list(self._artifacts)

    def __register(self, name: str) -> Path:
        path = self._root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        if name not in self._artifacts:
            self._artifacts.append(name)
        return path

    def write_model(self, name: str, model: BaseModel) -> Path:
        path = self.__register(name)
        path.write_text(model.model_dump_json(indent=2) + "\n", encoding="utf-8")
        _logger.info("wrote %s", path)
        return path

    def write_json(self, name: str, payload: Dict[str, Any]) -> Path:
        path = self.__register(name)
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        _logger.info("wrote %s", path)
        return path

    def write_csv(self, name: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> Path:
        path = self.__register(name)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            for row in rows:
                writer.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
        _logger.info("wrote %s", path)
        return path

    def write_manifest(self, manifest: Manifest) -> Path:
        path = self._root / "manifest.json"
        manifest.artifacts = list(self._artifacts)
        path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
        _logger.info("wrote %s", path)
        return path


def load_report(path: str) -> EnsembleReport:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    check_schema_version(data.get("schema_version", "0"))
    return EnsembleReport.model_validate(data)


def cycle_rows_csv(rows: Sequence[EnsembleCycleRow]) -> tuple:
    """Header and rows of the per-cycle ensemble table."""
    keys = sorted({k for r in rows if r.ow_occupation_mean for k in r.ow_occupation_mean})
    header = ["cycle", "samples", "chern_mean", "chern_std", "mutual_information_mean",
              "purity_deviation_max"] + [f"ow_{k}" for k in keys]
    out = []
    for r in rows:
        occ = r.ow_occupation_mean or {}
        out.append([r.cycle, r.samples, r.chern_mean, r.chern_std, r.mutual_information_mean,
                    r.purity_deviation_max] + [occ.get(k) for k in keys])
    return header, out

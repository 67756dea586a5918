#!/bin/env python3
"""
Run configuration: pydantic models, JSON parsing and key=value overrides.
"""

import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError, SchemaVersionError

_logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0.0"
THREADS_ENV = "FERMION_STEER_THREADS"

ExperimentKind = Literal["steer", "alpha-sweep", "noise-sweep", "domain-wall", "lindblad",
                         "symmetry", "povm", "oracle-selftest", "selftest"]
ObservableName = Literal["chern", "mutual_information", "purity", "charge", "ow_occupation",
                         "correlation"]

DEFAULT_OBSERVABLES = ["chern", "mutual_information", "purity", "charge", "ow_occupation"]


def check_schema_version(version: str) -> None:
    try:
        major = int(str(version).split(".")[0])
    except ValueError:
        raise SchemaVersionError(f"malformed schema_version {version!r}")
    current = int(SCHEMA_VERSION.split(".")[0])
    if major > current:
        raise SchemaVersionError(f"schema_version {version} is newer than supported {SCHEMA_VERSION}")


class ProtocolConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    L: int = Field(12, ge=2, le=64)
    alpha: float = 1.5
    n_shell: Optional[int] = Field(2, ge=1, description="truncation shell, null for untruncated modes")
    cycles: Optional[int] = Field(None, ge=0, description="defaults to L")
    noise_sigma: float = Field(0.0, ge=0.0, le=1.0)
    initial_charge: Optional[int] = Field(None, description="defaults to 2 L^2")
    seed: int = Field(0, ge=0, lt=2**63)
    trajectories: int = Field(100, ge=1)
    shuffle_sweep: bool = False
    tau: Optional[List[List[float]]] = Field(None, description="real orbital vectors tau_A, tau_B")
    observables: List[ObservableName] = Field(default_factory=lambda: list(DEFAULT_OBSERVABLES))
    observe_every: int = Field(1, ge=1)
    chern_self_average: bool = False
    snapshot_cycles: List[int] = Field(default_factory=list)

    @model_validator(mode="after")
    def _materialize(self) -> "ProtocolConfig":
        n_uc = self.L * self.L
        if self.cycles is None:
            self.cycles = self.L
        if self.initial_charge is None:
            self.initial_charge = 2 * n_uc
        if not n_uc < self.initial_charge < 3 * n_uc:
            raise ValueError(f"initial_charge must lie in ({n_uc}, {3 * n_uc}) for L = {self.L}, "
                             f"got {self.initial_charge}")
        if self.tau is not None:
            tau = np.asarray(self.tau, dtype=float)
            if tau.shape != (2, 2):
                raise ValueError(f"tau must be two 2-component vectors, got shape {tau.shape}")
            if np.max(np.abs(tau @ tau.T - np.eye(2))) > 1e-10:
                raise ValueError("tau vectors must be orthonormal")
        for c in self.snapshot_cycles:
            if not 0 <= c <= self.cycles:
                raise ValueError(f"snapshot cycle {c} outside the run of {self.cycles} cycles")
        return self


class DomainWallConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    alpha_in: float = 1.0
    alpha_out: float = 3.0
    half_width: Optional[int] = Field(None, ge=1, description="defaults to L // 4, a slab over half the columns")
    snapshot_cycles: List[int] = Field(default_factory=lambda: [2, 4, 6, 8, 10])


class SweepConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    alphas: List[float] = Field(default_factory=lambda: [round(1.5 + 0.1 * i, 10) for i in range(11)])
    sigmas: List[float] = Field(default_factory=lambda: [round(0.1 * i, 10) for i in range(11)])

    @model_validator(mode="after")
    def _check_sigmas(self) -> "SweepConfig":
        for s in self.sigmas:
            if not 0.0 <= s <= 1.0:
                raise ValueError(f"noise strength {s} outside [0, 1]")
        return self


class LindbladConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    L: int = Field(24, ge=2)
    alpha: float = 1.0
    n_bar: float = Field(0.5, ge=0.0, le=1.0)
    dt: Optional[float] = Field(None, gt=0.0, description="defaults to 0.01 / max gamma")
    t_max: Optional[float] = Field(None, gt=0.0, description="defaults to 10 T_conv")
    initial_upper: float = Field(0.5, ge=0.0, le=1.0)
    initial_lower: float = Field(0.5, ge=0.0, le=1.0)
    initial_coherence: float = Field(0.0, ge=0.0)
    record_every: int = Field(10, ge=1)

    @model_validator(mode="after")
    def _check_coherence(self) -> "LindbladConfig":
        if self.initial_coherence**2 > self.initial_upper * self.initial_lower + 1e-12:
            raise ValueError("initial_coherence^2 must not exceed initial_upper * initial_lower")
        return self


class SymmetryConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n: int = Field(8, ge=4, description="single-particle dimension, a multiple of 4")
    samples: int = Field(100, ge=1)
    seed: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _check_n(self) -> "SymmetryConfig":
        if self.n % 4:
            raise ValueError(f"n must be a multiple of 4, got {self.n}")
        return self


class PovmConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    alpha_param: float = 0.7
    n_modes: int = Field(2, ge=1, le=4)
    samples: int = Field(50, ge=1)
    seed: int = Field(0, ge=0)


class SelftestConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    cases: int = Field(1000, ge=1)
    max_modes: int = Field(4, ge=2, le=6)
    seed: int = Field(0, ge=0)


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: str = SCHEMA_VERSION
    experiment: ExperimentKind = "steer"
    output_dir: str = "results"
    threads: Optional[int] = Field(None, ge=1)
    progress: bool = True
    fixture_path: Optional[str] = None
    mode_cache: Optional[str] = Field(None, description="directory of cached OW mode sets")
    protocol: ProtocolConfig = Field(default_factory=ProtocolConfig)
    domain_wall: DomainWallConfig = Field(default_factory=DomainWallConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    lindblad: LindbladConfig = Field(default_factory=LindbladConfig)
    symmetry: SymmetryConfig = Field(default_factory=SymmetryConfig)
    povm: PovmConfig = Field(default_factory=PovmConfig)
    selftest: SelftestConfig = Field(default_factory=SelftestConfig)

    @model_validator(mode="after")
    def _check_version(self) -> "RunConfig":
        check_schema_version(self.schema_version)
        return self

    def echo(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")


class ConfigOverrides:
    """
    key=value overrides with dotted keys into the nested sections, e.g.
    protocol.L=16. Values are read as JSON literals and fall back to strings.
    """
    def __init__(self):
        self._params = {}

    @property
    def params(self) -> Dict[str, Any]:
        return self._params

    def parse(self, items: Sequence[str]) -> int:
        self._params.clear()
        for item in items:
            index = item.find("=")
            if index <= 0:
                raise ConfigError(f"override {item!r} is not of the form key=value")
            name = item[:index].strip()
            raw = item[index + 1:].strip()
            #strip one level of surrounding double quotes as in name="value"
            if len(raw) >= 2 and raw[0] == raw[-1] == '"':
                try:
                    value = json.loads(raw)
                except json.JSONDecodeError:
                    value = raw[1:-1]
            else:
                try:
                    value = json.loads(raw)
                except json.JSONDecodeError:
                    value = raw
            self._params[name] = value
        return len(self._params)

    def apply(self, data: Dict[str, Any]) -> Dict[str, Any]:
        for name, value in self._params.items():
            node = data
            keys = name.split(".")
            for key in keys[:-1]:
                child = node.get(key)
                if child is None:
                    child = {}
                    node[key] = child
                if not isinstance(child, dict):
                    raise ConfigError(f"override {name!r} descends into non-section {key!r}")
                node = child
            node[keys[-1]] = value
        return data


def _format_location(loc) -> str:
    return ".".join(str(p) for p in loc) if loc else "<root>"


def validate_config(data: Dict[str, Any]) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    if "schema_version" in data:
        try:
            check_schema_version(data["schema_version"])
        except SchemaVersionError as e:
            raise ConfigError(str(e), [f"schema_version: {e}"])
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        problems = [f"{_format_location(err['loc'])}: {err['msg']}" for err in e.errors()]
        raise ConfigError(f"invalid configuration ({len(problems)} problems)", problems)


def parse_config(source: Union[str, Path, None]=None, overrides: Sequence[str]=()) -> RunConfig:
    """
    Read a JSON configuration from a file path, '-' for stdin, or None for the
    defaults, apply key=value overrides and validate.
    """
    if source is None:
        data = {}
    else:
        if str(source) == "-":
            text = sys.stdin.read()
            name = "<stdin>"
        else:
            path = Path(source)
            try:
                text = path.read_text(encoding="utf-8")
            except OSError as e:
                raise ConfigError(f"cannot read configuration {path}: {e}")
            name = str(path)
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{name}: malformed JSON at line {e.lineno}, column {e.colno}: {e.msg}",
                              [f"line {e.lineno}, column {e.colno}: {e.msg}"])

    if overrides:
        params = ConfigOverrides()
        params.parse(overrides)
        data = params.apply(data)

    config = validate_config(data)
    _logger.debug("configuration validated: experiment %s", config.experiment)
    return config


def paper_scale(config: RunConfig) -> RunConfig:
    """Raise the run to L = 20, n_shell = 5 and 100 trajectories."""
    data = config.model_dump(mode="json")
    protocol = data["protocol"]
    protocol.update({"L": 20, "n_shell": 5, "trajectories": 100, "cycles": None,
                     "initial_charge": None})
    return validate_config(data)


def resolve_threads(cli_threads: Optional[int], config: RunConfig) -> int:
    """--threads, then the environment, then the config file, then 1."""
    if cli_threads is not None:
        return max(1, int(cli_threads))
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}")
    if config.threads is not None:
        return config.threads
    return 1

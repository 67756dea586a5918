#!/bin/env python3

import hashlib
import json
import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from .chern_model import Band, Orbital, OWMode, OWModeSet
from .errors import SchemaVersionError
from .gaussian import ModeVector
from .lattice import AlphaField, LatticeSpec

_logger = logging.getLogger(__name__)

FILE_ID = "FSOW"


class ModeSetSerializer(ABC):
    """
    Reads and writes OW mode sets as JSON. The file header carries a file id
    and a format version; the mode records are version specific.
    """
    version = None

    def save(self, modes: OWModeSet, file_name: Union[str, Path]) -> Path:
        path = Path(file_name)
        payload = {
            "fileid": FILE_ID,
            "version": self.version,
            "L": modes.lattice.L,
            "modes": [self.write_mode(modes.lattice, mode) for mode in modes],
        }
        path.write_text(json.dumps(payload, separators=(",", ":")))
        _logger.info("wrote %d OW modes to %s", len(modes), path)
        return path

    def load(self, file_name: Union[str, Path]) -> OWModeSet:
        payload = json.loads(Path(file_name).read_text())
        if payload.get("fileid") != FILE_ID:
            raise ValueError(f"bad file id {payload.get('fileid')!r} in {file_name}")
        if payload.get("version") != self.version:
            raise SchemaVersionError(f"expected mode set version {self.version}, got {payload.get('version')}")
        lattice = LatticeSpec(int(payload["L"]))
        modes = {}
        for record in payload["modes"]:
            key, mode = self.read_mode(lattice, record)
            modes[key] = mode
        return OWModeSet(lattice, modes)

    @abstractmethod
    def write_mode(self, lattice: LatticeSpec, mode: OWMode) -> Dict[str, Any]:
        """
        Subclasses must implement this method
        """
        pass

    @abstractmethod
    def read_mode(self, lattice: LatticeSpec, record: Dict[str, Any]) -> tuple:
        """
        Subclasses must implement this method
        """
        pass


class ModeSetSerializerV1(ModeSetSerializer):
    version = 1

    def write_mode(self, lattice: LatticeSpec, mode: OWMode) -> Dict[str, Any]:
        w = mode.wavefunction
        return {
            "center": list(mode.center),
            "orbital": mode.orbital.name,
            "band": mode.band.symbol,
            "shell": mode.shell,
            "support": w.support.tolist(),
            "re": w.amplitudes.real.tolist(),
            "im": w.amplitudes.imag.tolist(),
        }

    def read_mode(self, lattice: LatticeSpec, record: Dict[str, Any]) -> tuple:
        x, y = record["center"]
        orbital = Orbital[record["orbital"]]
        band = Band.from_symbol(record["band"])
        amplitudes = np.asarray(record["re"]) + 1j * np.asarray(record["im"])
        #stored amplitudes are already normalized
        w = ModeVector(lattice.n_modes, amplitudes, support=np.asarray(record["support"], dtype=int))
        mode = OWMode((x, y), orbital, band, w, record["shell"])
        return (lattice.site_index(x, y), int(orbital), int(band)), mode


def load_mode_set(file_name: Union[str, Path]) -> OWModeSet:
    """Pick the serializer matching the version stored in the file header."""
    header = json.loads(Path(file_name).read_text())
    version = header.get("version")
    if version == 1:
        return ModeSetSerializerV1().load(file_name)
    raise SchemaVersionError(f"unrecognized OW mode set version {version!r}")


def mode_set_key(field: AlphaField, n_shell: Optional[int]=None, tau=None) -> str:
    """Key of the mode set built from `field`, `n_shell` and `tau`."""
    payload = {
        "L": field.lattice.L,
        "alpha": field.values.tolist(),
        "n_shell": n_shell,
        "tau": None if tau is None else np.asarray(tau, dtype=float).tolist(),
    }
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def cached_mode_set(field: AlphaField, n_shell: Optional[int]=None, tau=None,
                    cache_dir: Union[str, Path, None]=None) -> OWModeSet:
    """
    OW modes of `field`. With a cache directory the set is read from there
    when an earlier run stored it, and stored there otherwise.
    """
    if cache_dir is None:
        return OWModeSet.build(field, n_shell, tau)
    path = Path(cache_dir) / f"ow_L{field.lattice.L}_{mode_set_key(field, n_shell, tau)}.json"
    if path.exists():
        _logger.info("reading OW modes from %s", path)
        return load_mode_set(path)
    modes = OWModeSet.build(field, n_shell, tau)
    path.parent.mkdir(parents=True, exist_ok=True)
    ModeSetSerializerV1().save(modes, path)
    return modes

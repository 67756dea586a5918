import csv
import json

import numpy as np
import pytest

from fermion_steer.chern_model import Band, Orbital, OWModeSet
from fermion_steer.errors import SchemaVersionError
from fermion_steer.lattice import AlphaField, LatticeSpec
from fermion_steer.ow_serializer import FILE_ID, ModeSetSerializerV1, cached_mode_set, load_mode_set, mode_set_key
from fermion_steer.report import (ArtifactWriter, CycleRecord, EnsembleCycleRow, EnsembleReport, Manifest,
                                  content_hash, cycle_rows_csv, load_report)


class TestContentHash:

    def test_key_order_does_not_matter(self):
        assert content_hash({"a": 1, "b": [1, 2]}) == content_hash({"b": [1, 2], "a": 1})

    def test_values_matter(self):
        assert content_hash({"a": 1}) != content_hash({"a": 2})


class TestArtifactWriter:

    def test_tracks_artifacts(self, tmp_path):
        writer = ArtifactWriter(tmp_path / "out")
        writer.write_json("config.json", {"x": 1})
        writer.write_csv("nested/table.csv", ["a", "b"], [[1, 0.5], [2, None]])
        writer.write_model("record.json", CycleRecord(cycle=3, chern=-1.0))
        assert writer.artifacts == ["config.json", "nested/table.csv", "record.json"]

        with open(tmp_path / "out" / "nested" / "table.csv", newline="") as f:
            rows = list(csv.reader(f))
        assert rows == [["a", "b"], ["1", "0.5"], ["2", ""]]
        assert json.loads((tmp_path / "out" / "record.json").read_text())["chern"] == -1.0

    def test_manifest_lists_artifacts(self, tmp_path):
        writer = ArtifactWriter(tmp_path)
        writer.write_json("a.json", {})
        writer.write_manifest(Manifest(experiment="steer", config_hash="0", exit_status=0))
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["artifacts"] == ["a.json"]
        assert manifest["exit_status"] == 0


class TestEnsembleReport:

    def test_cycle_table(self):
        rows = [EnsembleCycleRow(cycle=0, samples=2, chern_mean=0.0, ow_occupation_mean={"-A": 0.5, "+A": 0.4}),
                EnsembleCycleRow(cycle=1, samples=2)]
        header, out = cycle_rows_csv(rows)
        assert header[-2:] == ["ow_+A", "ow_-A"]
        assert out[0][-2:] == [0.4, 0.5]
        assert out[1][2] is None

    def test_load_report(self, tmp_path):
        report = EnsembleReport(experiment="steer", config={}, config_hash="abc", master_seed=3, strips={"a": [0]})
        path = tmp_path / "report.json"
        path.write_text(report.model_dump_json())
        assert load_report(path) == report

    def test_load_rejects_newer_schema(self, tmp_path):
        path = tmp_path / "report.json"
        path.write_text(json.dumps({"schema_version": "9.0.0"}))
        with pytest.raises(SchemaVersionError):
            load_report(path)


class TestModeSetSerializer:

    @pytest.fixture(scope="class")
    def modes(self):
        return OWModeSet.build(AlphaField.uniform(LatticeSpec(4), 1.5), n_shell=1)

    def test_save_and_load(self, tmp_path, modes):
        path = ModeSetSerializerV1().save(modes, tmp_path / "modes.json")
        loaded = load_mode_set(path)
        assert len(loaded) == len(modes)
        original = modes.get(6, Orbital.B, Band.UPPER)
        restored = loaded.get(6, Orbital.B, Band.UPPER)
        assert restored.center == original.center
        assert restored.shell == 1
        np.testing.assert_array_equal(restored.wavefunction.dense(), original.wavefunction.dense())

    def test_header(self, tmp_path, modes):
        path = ModeSetSerializerV1().save(modes, tmp_path / "modes.json")
        payload = json.loads(path.read_text())
        assert payload["fileid"] == FILE_ID
        assert payload["version"] == 1
        assert payload["L"] == 4

    def test_bad_file_id(self, tmp_path):
        path = tmp_path / "modes.json"
        path.write_text(json.dumps({"fileid": "XXXX", "version": 1, "L": 4, "modes": []}))
        with pytest.raises(ValueError):
            ModeSetSerializerV1().load(path)

    def test_unknown_version(self, tmp_path):
        path = tmp_path / "modes.json"
        path.write_text(json.dumps({"fileid": FILE_ID, "version": 7, "L": 4, "modes": []}))
        with pytest.raises(SchemaVersionError):
            load_mode_set(path)


class TestModeSetCache:

    @pytest.fixture
    def field(self):
        return AlphaField.uniform(LatticeSpec(4), 1.5)

    def test_stores_then_reads(self, tmp_path, field, monkeypatch):
        cache = tmp_path / "cache"
        built = cached_mode_set(field, n_shell=1, cache_dir=cache)
        assert len(list(cache.glob("ow_L4_*.json"))) == 1

        def no_build(cls, *args, **kwargs):
            raise AssertionError("mode set rebuilt despite cache")
        monkeypatch.setattr(OWModeSet, "build", classmethod(no_build))
        loaded = cached_mode_set(field, n_shell=1, cache_dir=cache)
        np.testing.assert_array_equal(loaded.get(3, Orbital.A, Band.LOWER).wavefunction.dense(),
                                      built.get(3, Orbital.A, Band.LOWER).wavefunction.dense())

    def test_without_cache_dir(self, tmp_path, field):
        assert len(cached_mode_set(field, n_shell=1)) == 4 * 16
        assert list(tmp_path.iterdir()) == []

    def test_key_follows_inputs(self, field):
        key = mode_set_key(field, 1)
        assert key == mode_set_key(AlphaField.uniform(LatticeSpec(4), 1.5), 1)
        assert key != mode_set_key(field, 2)
        assert key != mode_set_key(field, None)
        assert key != mode_set_key(AlphaField.uniform(LatticeSpec(4), 2.5), 1)
        assert key != mode_set_key(field, 1, tau=[[0.6, 0.8], [-0.8, 0.6]])

"""
End-to-end runs through the command line on small configurations.
"""

import csv
import json

import pytest

from fermion_steer.cli import EXIT_CONFIG, EXIT_FAILED, EXIT_OK, build_parser, load_config, main
from fermion_steer.config import parse_config
from fermion_steer.experiments import RUNNERS, report_echo, run
from fermion_steer.report import content_hash

SMALL_PROTOCOL = ["--set", "protocol.L=4", "--set", "protocol.n_shell=1", "--set", "protocol.cycles=2",
                  "--set", "protocol.trajectories=2", "--no-progress"]


def read_json(path):
    return json.loads(path.read_text())


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


class TestParser:

    def test_emit_schema(self, capsys):
        assert main(["--emit-schema"]) == EXIT_OK
        schema = json.loads(capsys.readouterr().out)
        assert "protocol" in schema["properties"]

    def test_no_command(self, capsys):
        assert main([]) == EXIT_CONFIG

    def test_invalid_override(self, tmp_path, capsys):
        assert main(["steer", "--set", "protocol.L=1", "--out", str(tmp_path)]) == EXIT_CONFIG
        assert "protocol.L" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        assert main(["lindblad", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG

    @pytest.mark.parametrize("flag", ["--paper-scale", "--large-scale"])
    def test_paper_scale(self, flag):
        config = load_config(build_parser().parse_args(["steer", flag, "--set", "protocol.L=6"]))
        protocol = config.protocol
        assert (protocol.L, protocol.n_shell, protocol.trajectories) == (20, 5, 100)
        assert protocol.initial_charge == 2 * 20 * 20

    def test_every_experiment_has_a_subcommand(self):
        assert set(RUNNERS) == {"steer", "alpha-sweep", "noise-sweep", "domain-wall", "lindblad", "symmetry",
                                "povm", "oracle-selftest", "selftest"}


class TestExperiments:

    def test_steer(self, tmp_path):
        out = tmp_path / "steer"
        assert main(["steer", "--out", str(out), "--seed", "4"] + SMALL_PROTOCOL) == EXIT_OK
        report = read_json(out / "report.json")
        manifest = read_json(out / "manifest.json")
        assert report["master_seed"] == 4
        assert len(report["trajectories"]) == 2
        assert [row["cycle"] for row in report["rows"]] == [0, 1, 2]
        assert manifest["completed_trajectories"] == [0, 1]
        assert manifest["config_hash"] == report["config_hash"]
        assert {"config.json", "report.json", "cycles.csv", "trajectories.csv"} <= set(manifest["artifacts"])
        assert read_csv(out / "trajectories.csv")[0][0] == "index"

    def test_output_location_does_not_change_the_hash(self, tmp_path):
        a = parse_config(overrides=["output_dir=\"a\"", "threads=2"])
        b = parse_config(overrides=["output_dir=\"b\""])
        assert content_hash(report_echo(a)) == content_hash(report_echo(b))

    def test_steer_matches_its_own_fixture(self, tmp_path):
        first = tmp_path / "first"
        assert main(["steer", "--out", str(first)] + SMALL_PROTOCOL) == EXIT_OK
        second = tmp_path / "second"
        args = ["steer", "--out", str(second), "--set", f"fixture_path=\"{first / 'report.json'}\""]
        assert main(args + SMALL_PROTOCOL + ["--threads", "2"]) == EXIT_OK

    def test_mode_cache_is_reused(self, tmp_path):
        cache = tmp_path / "modes"
        for name in ("first", "second"):
            args = ["steer", "--out", str(tmp_path / name), "--mode-cache", str(cache)]
            assert main(args + SMALL_PROTOCOL) == EXIT_OK
        assert len(list(cache.glob("*.json"))) == 1
        first = read_json(tmp_path / "first" / "report.json")
        second = read_json(tmp_path / "second" / "report.json")
        assert first["rows"] == second["rows"]
        assert first["config_hash"] == second["config_hash"]

    def test_alpha_sweep(self, tmp_path):
        out = tmp_path / "sweep"
        args = ["alpha-sweep", "--out", str(out), "--set", "sweep.alphas=[1.5,2.5]"] + SMALL_PROTOCOL
        assert main(args) == EXIT_OK
        sweep = read_json(out / "sweep.json")
        assert sweep["parameter"] == "alpha"
        assert [p["value"] for p in sweep["points"]] == [1.5, 2.5]
        assert (out / "alpha_1.5" / "cycles.csv").exists()
        assert len(read_csv(out / "sweep.csv")) == 3

    def test_noise_sweep(self, tmp_path):
        out = tmp_path / "noise"
        args = ["noise-sweep", "--out", str(out), "--set", "sweep.sigmas=[0,0.5]"] + SMALL_PROTOCOL
        assert main(args) == EXIT_OK
        assert read_json(out / "sweep.json")["parameter"] == "noise_sigma"
        assert (out / "noise_sigma_0.5" / "cycles.csv").exists()

    def test_domain_wall(self, tmp_path):
        out = tmp_path / "wall"
        args = ["domain-wall", "--out", str(out), "--set", "protocol.L=12", "--set", "protocol.n_shell=1",
                "--set", "protocol.cycles=2", "--set", "protocol.trajectories=2",
                "--set", "domain_wall.snapshot_cycles=[1,2,6]", "--no-progress"]
        assert main(args) == EXIT_OK
        report = read_json(out / "domain_wall.json")
        assert [s["cycle"] for s in report["snapshots"]] == [1, 2]
        assert report["columns"]["inside"] == [4, 5, 6, 7]
        assert report["columns"]["walls"] == [2, 3, 8, 9]
        assert report["columns"]["outside"] == [0, 1, 10, 11]
        assert len(read_csv(out / "marker_c002.csv")) == 12 * 12 + 1
        assert (out / "contour_c001.csv").exists()
        assert (out / "marker_reference.csv").exists()

    def test_lindblad(self, tmp_path):
        out = tmp_path / "lindblad"
        args = ["lindblad", "--out", str(out), "--set", "lindblad.L=6", "--set", "lindblad.t_max=5.0"]
        assert main(args) == EXIT_OK
        result = read_json(out / "lindblad.json")["result"]
        assert result["upper_bound_violation"] <= 1e-9
        assert read_csv(out / "lindblad.csv")[0] == ["t", "upper", "lower", "coherence_max"]

    def test_lindblad_gapless_fails(self, tmp_path):
        args = ["lindblad", "--out", str(tmp_path), "--set", "lindblad.alpha=2.0"]
        assert main(args) == EXIT_FAILED
        assert read_json(tmp_path / "manifest.json")["exit_status"] == EXIT_FAILED

    def test_symmetry(self, tmp_path):
        assert main(["symmetry", "--out", str(tmp_path), "--set", "symmetry.samples=2"]) == EXIT_OK
        rows = read_json(tmp_path / "symmetry.json")["rows"]
        assert len(rows) == 10
        assert all(r["passed"] for r in rows)

    def test_povm(self, tmp_path):
        assert main(["povm", "--out", str(tmp_path), "--set", "povm.samples=3"]) == EXIT_OK
        payload = read_json(tmp_path / "povm.json")
        assert set(payload["constructions"]) == {"A", "AI", "BDI", "D"}
        assert len(payload["witnesses"]) == 5

    def test_oracle_selftest(self, tmp_path):
        args = ["oracle-selftest", "--out", str(tmp_path), "--set", "selftest.cases=20"]
        assert main(args) == EXIT_OK
        assert read_json(tmp_path / "oracle.json")["passed"]

    def test_run_writes_manifest_on_error(self, tmp_path):
        config = parse_config(overrides=["experiment=\"lindblad\"", f"output_dir=\"{tmp_path}\"",
                                         "lindblad.alpha=0.0"])
        with pytest.raises(ArithmeticError):
            run(config)
        assert read_json(tmp_path / "manifest.json")["exit_status"] == 1

    def test_domain_wall_too_small(self, tmp_path):
        args = ["domain-wall", "--out", str(tmp_path)] + SMALL_PROTOCOL
        assert main(args) == EXIT_FAILED
        assert read_json(tmp_path / "manifest.json")["exit_status"] == EXIT_FAILED


@pytest.mark.slow
def test_domain_wall_contour_concentrates_at_the_walls(tmp_path):
    args = ["domain-wall", "--out", str(tmp_path), "--set", "protocol.L=16", "--set", "protocol.n_shell=2",
            "--set", "protocol.cycles=10", "--set", "protocol.trajectories=16", "--threads", "2",
            "--no-progress"]
    assert main(args) == EXIT_OK
    report = read_json(tmp_path / "domain_wall.json")
    snapshots = {s["cycle"]: s for s in report["snapshots"]}

    assert snapshots[6]["marker_inside"] == pytest.approx(-1.0, abs=0.15)
    assert snapshots[6]["marker_outside"] == pytest.approx(0.0, abs=0.15)

    last = snapshots[10]
    assert last["contour_walls"] >= 5 * last["contour_inside"]
    assert last["contour_walls"] >= 5 * last["contour_outside"]

    rates = report["contour_rates"]
    assert rates["inside"] > rates["walls"]
    assert rates["outside"] > rates["walls"]

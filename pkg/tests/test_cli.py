import json
import math
import sys

import pytest
from typer.testing import CliRunner

from pulsegen.application import compiler
from pulsegen.catalog.problems import catalog_problem, default_system, pps_via_sqr
from pulsegen.ga.simulator import safe_fitness
from pulsegen.utils.objects import GAResult, PulseGene, PulseSequence, StateLabel
from pulsegen.utils.utils import load_sequence, save_sequence
from scripts.python.cli import app, main

runner = CliRunner()

QUICK = "population_size=30\ngenerations=40\nrestarts=1\npolish_generations=0\nd_max=0.002\n"


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "ga.conf"
    path.write_text(QUICK)
    return path


@pytest.fixture
def identity_file(tmp_path):
    path = tmp_path / "identity.json"
    save_sequence(path, PulseSequence(n_channels=1, genes=[PulseGene(flips=[0.0], phases=[0.0])]))
    return path


def run_optimize(out, config_file, seed="7"):
    return runner.invoke(
        app,
        ["optimize", "--problem", "sqr1", "--seed", seed, "--config", str(config_file), "--out", str(out)],
    )


class TestOptimize:
    def test_missing_problem(self):
        result = runner.invoke(app, ["optimize"])
        assert result.exit_code == 1
        assert "--problem is required" in result.output

    def test_unknown_problem(self, tmp_path):
        result = runner.invoke(app, ["optimize", "--problem", "toffoli", "--out", str(tmp_path)])
        assert result.exit_code == 1
        assert "unknown problem" in result.output

    def test_bad_config_key(self, tmp_path):
        path = tmp_path / "ga.conf"
        path.write_text("populaton_size=20\n")
        result = runner.invoke(app, ["optimize", "--problem", "sqr1", "--config", str(path)])
        assert result.exit_code == 1
        assert "populaton_size" in result.output

    def test_out_of_range_setting(self, config_file):
        result = runner.invoke(
            app, ["optimize", "--problem", "sqr1", "--config", str(config_file), "--cutoff", "1.5"]
        )
        assert result.exit_code == 1
        assert "cutoff" in result.output

    def test_writes_outputs_and_verifies(self, tmp_path, config_file):
        out = tmp_path / "run"
        result = run_optimize(out, config_file)
        assert result.exit_code == 0, result.output

        report = json.loads((out / "report.json").read_text())
        assert report["seed"] == 7
        assert report["problem"] == "sqr1"
        assert (out / "history.csv").read_text().startswith("generation,best,mean")

        verified = runner.invoke(
            app,
            ["verify", "--sequence", str(out / "sequence.json"), "--problem", "sqr1", "--tolerance", "0"],
        )
        assert verified.exit_code == 0
        assert f"fidelity: {report['best_fidelity']!r}" in verified.output

    def test_rerun_is_identical(self, tmp_path, config_file):
        run_optimize(tmp_path / "a", config_file)
        run_optimize(tmp_path / "b", config_file)
        for name in ("sequence.json", "report.json", "history.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        assert "wall_time_s" not in (tmp_path / "a" / "report.json").read_text()

    @pytest.mark.parametrize("name", ["cnot12", "pps00", "bell-psi-plus"])
    def test_via_sqr_needs_excited_pps(self, tmp_path, name):
        result = runner.invoke(app, ["optimize", "--problem", name, "--via-sqr", "--out", str(tmp_path)])
        assert result.exit_code == 1
        assert "via_sqr" in result.output
        assert not (tmp_path / "report.json").exists()

    def test_via_sqr_appends_selective_pulses(self, tmp_path, config_file, monkeypatch):
        base = PulseSequence(
            n_channels=1,
            genes=[
                PulseGene(flips=[math.pi / 4], phases=[0.0], delay=1e-3, crusher=True),
                PulseGene(flips=[math.pi / 2], phases=[math.pi / 2]),
            ],
        )
        requested = []

        def fake_optimize(problem, config):
            requested.append(problem.name)
            return GAResult(best=base, best_fitness=0.5, history=[], seed=config.rng_seed, converged=False)

        monkeypatch.setattr(compiler, "optimize", fake_optimize)
        out = tmp_path / "run"
        result = runner.invoke(
            app,
            [
                "optimize", "--problem", "pps01", "--via-sqr",
                "--seed", "7", "--config", str(config_file), "--out", str(out),
            ],
        )

        expected = pps_via_sqr(base, StateLabel.PPS01, default_system())
        fidelity = safe_fitness(expected, catalog_problem("pps01"))
        report = json.loads((out / "report.json").read_text())
        assert requested == ["pps00"]
        assert load_sequence(out / "sequence.json") == expected
        assert report["problem"] == "pps01"
        assert report["best_fidelity"] == pytest.approx(fidelity)
        assert report["genes_before"] == report["genes_after"] == expected.m
        assert result.exit_code == (0 if report["converged"] else 2)

    @pytest.mark.slow
    def test_cnot_example_converges(self, tmp_path):
        out = tmp_path / "cnot"
        result = runner.invoke(
            app,
            [
                "optimize", "--problem", "cnot12", "--delta", "500", "--j", "5",
                "--seed", "7", "--cutoff", "0.9999", "--out", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        assert json.loads((out / "report.json").read_text())["best_fidelity"] >= 0.9999

    @pytest.mark.slow
    def test_bell_example_converges(self, tmp_path):
        out = tmp_path / "bell"
        result = runner.invoke(
            app, ["optimize", "--problem", "bell-phi-minus", "--j", "50", "--seed", "7", "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        assert json.loads((out / "report.json").read_text())["best_fidelity"] >= 0.99


class TestVerify:
    def test_shortfall_exit_code(self, identity_file):
        result = runner.invoke(
            app, ["verify", "--sequence", str(identity_file), "--problem", "cnot12", "--tolerance", "0.9"]
        )
        assert result.exit_code == 2
        assert "fidelity: 0.5" in result.output

    def test_passes_with_low_tolerance(self, identity_file):
        result = runner.invoke(
            app, ["verify", "--sequence", str(identity_file), "--problem", "cnot12", "--tolerance", "0.4"]
        )
        assert result.exit_code == 0

    def test_state_problem_prints_populations(self, identity_file):
        result = runner.invoke(
            app, ["verify", "--sequence", str(identity_file), "--problem", "pps00", "--tolerance", "0"]
        )
        assert result.exit_code == 0
        assert "diagonal populations" in result.output
        assert "transfer efficiency: 1.000000" in result.output

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"n_channels": 1, "genes": [{"flips": [0.0]}]}))
        result = runner.invoke(app, ["verify", "--sequence", str(path), "--problem", "cnot12"])
        assert result.exit_code == 1
        assert "invalid sequence file" in result.output
        assert "genes.0" in result.output

    def test_crusher_against_gate(self, tmp_path):
        path = tmp_path / "crush.json"
        gene = PulseGene(flips=[math.pi / 2], phases=[0.0], crusher=True)
        save_sequence(path, PulseSequence(n_channels=1, genes=[gene]))
        result = runner.invoke(app, ["verify", "--sequence", str(path), "--problem", "cnot12"])
        assert result.exit_code == 1

    def test_missing_sequence(self):
        result = runner.invoke(app, ["verify", "--problem", "cnot12"])
        assert result.exit_code == 1


class TestSweep:
    def test_writes_csv(self, tmp_path):
        out = tmp_path / "sweep.csv"
        result = runner.invoke(
            app, ["sweep", "--family", "sqr", "--ratios", "0,0.01", "--thetas", "pi/2", "--out", str(out)]
        )
        assert result.exit_code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "j_over_delta,theta,fidelity,converged"
        assert len(lines) == 3
        assert lines[1].endswith(",true")

    def test_empty_grid(self, tmp_path):
        result = runner.invoke(
            app, ["sweep", "--family", "sqr", "--ratios", "", "--out", str(tmp_path / "s.csv")]
        )
        assert result.exit_code == 1
        assert "empty" in result.output

    def test_unknown_family(self, tmp_path):
        result = runner.invoke(app, ["sweep", "--family", "bell", "--out", str(tmp_path / "s.csv")])
        assert result.exit_code == 1


def test_problems_lists_catalogue():
    result = runner.invoke(app, ["problems"])
    assert result.exit_code == 0
    assert "cnot2bar1" in result.output
    assert "bell-phi-minus" in result.output


@pytest.mark.parametrize("argv", [["pulsegen", "optimize", "--no-such-flag"], ["pulsegen", "frobnicate"]])
def test_usage_errors_exit_1(monkeypatch, argv):
    monkeypatch.setattr(sys, "argv", argv)
    with pytest.raises(SystemExit) as info:
        main()
    assert info.value.code == 1

"""
Test cases for the resnets command line
"""
import json

import numpy as np
import pytest
from click.testing import CliRunner

from resnets.cli import cli, run
from resnets.storage import load_matrix, load_population

FAST = ["--iterations", "2", "--h", "4"]


@pytest.fixture(scope="module")
def population_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("pop")
    code = run(["generate", "--subjects", "6", "--rois", "5", "--clusters", "2",
                "--between-cluster-separation", "1.0", "--seed", "7", "--out", str(out), "--verbosity", "quiet"])
    assert code == 0
    return out


class TestHelp:
    @pytest.mark.parametrize("command", ["generate", "cbt", "embed", "predict", "evaluate"])
    def test_subcommand_help(self, command):
        result = CliRunner().invoke(cli, [command, "--help"])
        assert result.exit_code == 0
        assert "--seed" in result.output
        assert "--out" in result.output

    def test_train_flags_documented(self):
        result = CliRunner().invoke(cli, ["evaluate", "--help"], terminal_width=200)
        help_text = " ".join(result.output.split())
        for flag in ["--learning-rate-encoder", "--iterations", "--noise-sigma", "--h", "--prior", "--workers"]:
            assert flag in help_text
        assert "[default: 30]" in help_text

    def test_run_help_exits_zero(self):
        assert run(["evaluate", "--help"]) == 0


class TestExitCodes:
    def test_unknown_flag(self, capsys):
        assert run(["generate", "--no-such-flag"]) == 1
        assert "Usage" in capsys.readouterr().err

    def test_unknown_method(self, population_dir, tmp_path):
        code = run(["evaluate", "--manifest", str(population_dir / "manifest.json"),
                    "--methods", "resnets,knn", "--out", str(tmp_path)])
        assert code == 1

    def test_validation_error(self, tmp_path):
        code = run(["generate", "--subjects", "2", "--clusters", "3", "--out", str(tmp_path), "--verbosity", "quiet"])
        assert code == 2

    def test_invalid_matrix(self, tmp_path):
        matrix = tmp_path / "m.csv"
        matrix.write_text("0,1\n2,0\n")
        assert run(["embed", "--matrix", str(matrix), "--out", str(tmp_path / "out"), "--verbosity", "quiet"]) == 2

    def test_matrix_not_utf8(self, tmp_path):
        matrix = tmp_path / "m.csv"
        matrix.write_bytes(b"0,1\n\xff,0\n")
        assert run(["embed", "--matrix", str(matrix), "--out", str(tmp_path / "out"), "--verbosity", "quiet"]) == 2

    def test_missing_manifest(self, tmp_path):
        code = run(["cbt", "--manifest", str(tmp_path / "nope.json"), "--out", str(tmp_path), "--verbosity", "quiet"])
        assert code == 4

    def test_divergence(self, population_dir, tmp_path):
        code = run(["embed", "--matrix", str(population_dir / "networks" / "subj-000_t0.csv"),
                    "--learning-rate-encoder", "1e300", "--iterations", "5",
                    "--out", str(tmp_path), "--verbosity", "quiet"])
        assert code == 3

    def test_refuses_overwrite(self, population_dir):
        code = run(["generate", "--subjects", "6", "--rois", "5", "--clusters", "2",
                    "--out", str(population_dir), "--verbosity", "quiet"])
        assert code == 4

    def test_predict_needs_one_target(self, population_dir, tmp_path):
        code = run(["predict", "--manifest", str(population_dir / "manifest.json"),
                    "--out", str(tmp_path), "--verbosity", "quiet"])
        assert code == 1


class TestGenerate:
    def test_outputs(self, population_dir):
        population = load_population(population_dir / "manifest.json")
        assert population.n_subjects == 6
        assert population.n_rois == 5
        labels = json.loads((population_dir / "clusters.json").read_text())
        assert labels["config"]["seed"] == 7
        assert set(labels["clusters"]) == set(population.subject_ids)


class TestCbt:
    def test_outputs(self, population_dir, tmp_path):
        assert run(["cbt", "--manifest", str(population_dir / "manifest.json"),
                    "--out", str(tmp_path), "--verbosity", "quiet"]) == 0
        template = load_matrix(tmp_path / "cbt.csv")
        chosen = json.loads((tmp_path / "cbt_chosen.json").read_text())
        assert template.n_rois == 5
        assert chosen["timepoint"] == "t0"
        assert len(chosen["edges"]) == 10


class TestEmbed:
    def test_outputs(self, population_dir, tmp_path):
        code = run(["embed", "--matrix", str(population_dir / "networks" / "subj-001_t0.csv"),
                    *FAST, "--out", str(tmp_path), "--verbosity", "quiet"])
        assert code == 0
        values = (tmp_path / "embedding.csv").read_text().strip().split(",")
        assert len(values) == 5 * 4
        assert json.loads((tmp_path / "embedding.json").read_text())["config"]["h"] == 4


class TestPredict:
    def test_held_out_subject(self, population_dir, tmp_path):
        code = run(["predict", "--manifest", str(population_dir / "manifest.json"), "--test-subject", "subj-002",
                    "--method", "resnets", "--k", "2", *FAST, "--out", str(tmp_path), "--verbosity", "quiet"])
        assert code == 0
        payload = json.loads((tmp_path / "prediction.json").read_text())
        assert payload["test_subject"] == "subj-002"
        assert len(payload["selected"]["indices"]) == 2
        assert "subj-002" not in payload["selected"]["subjects"]
        assert set(payload["metrics"]["t1"]) == {"mad", "mse"}
        assert load_matrix(tmp_path / "predicted_t1.csv").n_rois == 5
        error_map = np.loadtxt(tmp_path / "error_map_t1.csv", delimiter=",")
        assert error_map.shape == (5, 5)

    def test_matches_evaluation_cell(self, population_dir, tmp_path):
        manifest = str(population_dir / "manifest.json")
        common = [*FAST, "--seed", "7", "--verbosity", "quiet"]
        assert run(["predict", "--manifest", manifest, "--test-subject", "subj-002", "--method", "resnets",
                    "--k", "2", *common, "--out", str(tmp_path / "p")]) == 0
        assert run(["evaluate", "--manifest", manifest, "--methods", "resnets", "--k", "2",
                    *common, "--out", str(tmp_path / "e")]) == 0
        predicted = json.loads((tmp_path / "p" / "prediction.json").read_text())["metrics"]["t1"]
        cells = json.loads((tmp_path / "e" / "report.json").read_text())["cells"]
        cell = next(c for c in cells if c["subject"] == "subj-002")
        assert predicted["mad"] == pytest.approx(cell["mad"], rel=1e-12)
        assert predicted["mse"] == pytest.approx(cell["mse"], rel=1e-12)

    def test_new_baseline(self, population_dir, tmp_path):
        code = run(["predict", "--manifest", str(population_dir / "manifest.json"),
                    "--baseline", str(population_dir / "networks" / "subj-004_t0.csv"),
                    "--method", "snets", "--k", "3", "--out", str(tmp_path), "--verbosity", "quiet"])
        assert code == 0
        payload = json.loads((tmp_path / "prediction.json").read_text())
        assert "metrics" not in payload
        assert not (tmp_path / "error_map_t1.csv").exists()


class TestEvaluate:
    def test_outputs_are_byte_identical(self, population_dir, tmp_path):
        args = ["evaluate", "--manifest", str(population_dir / "manifest.json"),
                "--methods", "resnets,esnets,snets", "--k", "2,3", *FAST, "--seed", "7", "--verbosity", "quiet"]
        assert run([*args, "--out", str(tmp_path / "a")]) == 0
        assert run([*args, "--out", str(tmp_path / "b"), "--workers", "2"]) == 0
        for name in ["report.json", "plot_data.csv"]:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        report = json.loads((tmp_path / "a" / "report.json").read_text())
        assert report["config"]["seed"] == 7
        assert len(report["cells"]) == 3 * 2 * 6
        assert "wall_clock_seconds" in json.loads((tmp_path / "a" / "timing.json").read_text())

    def test_k_too_large(self, population_dir, tmp_path):
        code = run(["evaluate", "--manifest", str(population_dir / "manifest.json"), "--k", "5",
                    *FAST, "--out", str(tmp_path), "--verbosity", "quiet"])
        assert code == 2

    def test_figure(self, population_dir, tmp_path):
        code = run(["evaluate", "--manifest", str(population_dir / "manifest.json"), "--methods", "snets",
                    "--k", "2", "--figure", "--out", str(tmp_path), "--verbosity", "quiet"])
        assert code == 0
        assert (tmp_path / "comparison.png").stat().st_size > 0

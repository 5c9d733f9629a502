"""
Integration tests for the command-line interface.

Tests cover:
- solve: files written, reproducibility, usage errors
- sweep: flag and JSON driven batches with summary tables
- metrics: stored result files, comparisons and malformed inputs
"""

from __future__ import annotations

import json

import pytest

from src.cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, main
from src.mosar_models import EnvelopeMode
from src.result_files import deterministic_payload, read_provenance, read_result, read_table

TINY_FLAGS = ["--tmax", "10", "--tmin", "1", "--alpha", "0.5", "--iters", "10"]


@pytest.fixture(autouse=True)
def isolated_env(monkeypatch, tmp_path):
    """Reference fronts and default outputs go to the test directory."""
    monkeypatch.setenv("MOSAR_CACHE_DIR", str(tmp_path / "cache"))
    monkeypatch.setenv("MOSAR_OUTPUT_DIR", str(tmp_path / "default_results"))
    monkeypatch.delenv("MOSAR_VERIFY_INVARIANTS", raising=False)


def solve(out, *extra):
    args = ["solve", "--problem", "srn", "--algo", "mosar2", "--out", str(out)]
    return main([*args, *TINY_FLAGS, *extra])


class TestSolveCommand:
    """Tests for `mosar solve`."""

    def test_writes_result_and_front(self, tmp_path, capsys):
        """A run leaves its result file and front CSV behind."""
        assert solve(tmp_path, "--seed", "5") == EXIT_OK

        assert (tmp_path / "srn_mosar2_s5.txt").exists()
        assert (tmp_path / "srn_mosar2_s5.front.csv").exists()
        assert "Evaluations: 40 (+100 initial)" in capsys.readouterr().out

    def test_same_seed_same_file(self, tmp_path):
        """Result files differ only in the wall-clock line."""
        assert solve(tmp_path / "a", "--seed", "2") == EXIT_OK
        assert solve(tmp_path / "b", "--seed", "2") == EXIT_OK

        first = (tmp_path / "a" / "srn_mosar2_s2.txt").read_text()
        second = (tmp_path / "b" / "srn_mosar2_s2.txt").read_text()
        assert deterministic_payload(first) == deterministic_payload(second)

    def test_configuration_with_invariant_checks(self, tmp_path):
        """The configuration problem runs with per-step invariant checks."""
        code = main(
            [
                "solve",
                "--problem",
                "config",
                "--algo",
                "amosa",
                "--sl",
                "9.0",
                "--verify-invariants",
                "--out",
                str(tmp_path),
                *TINY_FLAGS,
            ]
        )
        assert code == EXIT_OK
        assert (tmp_path / "config_sl9_amosa_s1.txt").exists()

    def test_literal_envelope(self, tmp_path):
        """`--envelope paper` selects the literal extent form."""
        code = main(
            [
                "solve",
                "--problem",
                "config",
                "--algo",
                "mosar2",
                "--sl",
                "9.4",
                "--envelope",
                "paper",
                "--out",
                str(tmp_path),
                *TINY_FLAGS,
            ]
        )
        assert code == EXIT_OK

        result = read_result(tmp_path / "config_sl9.4_mosar2_s1.txt")
        assert result.metadata.problem.envelope_mode == EnvelopeMode.PAPER_LITERAL

    def test_unknown_algorithm(self, tmp_path):
        """argparse rejects algorithm names it does not know."""
        code = main(["solve", "--problem", "srn", "--algo", "nsga2", "--out", str(tmp_path)])
        assert code == EXIT_USAGE

    def test_configuration_needs_side_length(self, tmp_path, capsys):
        """The configuration problem without --sl is a usage error."""
        code = main(["solve", "--problem", "config", "--algo", "mosar1", "--out", str(tmp_path)])
        assert code == EXIT_USAGE
        assert "--sl" in capsys.readouterr().err

    def test_invalid_schedule(self, tmp_path):
        """A cooling rate outside (0, 1) is a usage error."""
        assert solve(tmp_path, "--alpha", "1.5") == EXIT_USAGE


class TestSweepCommand:
    """Tests for `mosar sweep`."""

    def test_flag_driven_sweep(self, tmp_path):
        """Every (side length, algorithm, seed) triple gets a result file."""
        out = tmp_path / "sweep"
        code = main(
            [
                "sweep",
                "--problem",
                "config",
                "--sl-grid",
                "9.4,9.0",
                "--seeds",
                "1..2",
                "--algos",
                "amosa,mosar2",
                "--out",
                str(out),
                *TINY_FLAGS,
            ]
        )
        assert code == EXIT_OK
        assert len(list(out.glob("config_*.txt"))) == 8
        coverage = read_table(out / "coverage.csv")
        assert len(coverage) == 4
        assert set(coverage["pair"]) == {"C(amosa,mosar2)", "C(mosar2,amosa)"}

        provenance = read_provenance(out / "coverage.csv")
        assert provenance["seeds"] == [1, 2]
        assert provenance["experiment"]["sl_grid"] == [9.4, 9.0]
        assert len(provenance["configurations"]) == 4

    def test_json_driven_sweep(self, tmp_path):
        """An ExperimentConfig file drives the batch."""
        out = tmp_path / "from_json"
        config_path = tmp_path / "experiment.json"
        config_path.write_text(
            json.dumps(
                {
                    "problem": "srn",
                    "algorithms": ["mosar1"],
                    "seeds": [1],
                    "schedule": {"t_max": 10, "t_min": 1, "alpha": 0.5, "iters_per_temp": 10},
                    "output_dir": str(out),
                }
            )
        )
        assert main(["sweep", "--config", str(config_path)]) == EXIT_OK
        assert (out / "srn_mosar1_s1.txt").exists()
        assert (out / "igd.csv").exists()

    def test_bad_seed_range(self, tmp_path):
        """Backwards seed ranges are a usage error."""
        code = main(["sweep", "--problem", "srn", "--seeds", "3..1", "--out", str(tmp_path)])
        assert code == EXIT_USAGE

    def test_unreadable_config(self, tmp_path):
        """A missing experiment file is a usage error."""
        assert main(["sweep", "--config", str(tmp_path / "absent.json")]) == EXIT_USAGE


class TestMetricsCommand:
    """Tests for `mosar metrics`."""

    def test_metrics_of_stored_runs(self, tmp_path, capsys):
        """Indicators and coverage of runs against each other."""
        solve(tmp_path, "--seed", "1")
        main(["solve", "--problem", "srn", "--algo", "amosa", "--out", str(tmp_path), *TINY_FLAGS])
        capsys.readouterr()

        out_csv = tmp_path / "tables" / "metrics.csv"
        code = main(
            [
                "metrics",
                "--inputs",
                str(tmp_path / "srn_mosar2_*.txt"),
                "--against",
                str(tmp_path / "srn_amosa_*.txt"),
                "--resolution",
                "1000",
                "--out",
                str(out_csv),
            ]
        )
        assert code == EXIT_OK
        assert "Coverage:" in capsys.readouterr().out

        table = read_table(out_csv)
        assert {"cardinality", "minimal_spacing", "igd", "hv"} <= set(table.columns)
        provenance = read_provenance(out_csv)
        assert provenance["seeds"] == [1]
        assert provenance["resolution"] == 1000
        assert {c["algorithm"] for c in provenance["configurations"]} == {"amosa", "mosar2"}
        assert (tmp_path / "tables" / "metrics_coverage.csv").exists()
        assert (tmp_path / "tables" / "metrics_accounted_proportion.csv").exists()

    def test_metric_subset(self, tmp_path, capsys):
        """Only the requested indicators are reported."""
        solve(tmp_path, "--seed", "1")
        capsys.readouterr()

        code = main(["metrics", "--inputs", str(tmp_path / "*.txt"), "--metrics", "n,sm"])
        assert code == EXIT_OK
        output = capsys.readouterr().out
        assert "cardinality" in output
        assert "igd" not in output

    def test_malformed_file(self, tmp_path, capsys):
        """Truncated result files are a runtime failure."""
        solve(tmp_path, "--seed", "1")
        path = tmp_path / "srn_mosar2_s1.txt"
        path.write_text("\n".join(path.read_text().splitlines()[:-1]))

        assert main(["metrics", "--inputs", str(path)]) == EXIT_FAILURE
        assert "malformed result file" in capsys.readouterr().err

    def test_no_matching_files(self, tmp_path):
        """An empty glob is a usage error."""
        assert main(["metrics", "--inputs", str(tmp_path / "none_*.txt")]) == EXIT_USAGE

    def test_unknown_metric(self, tmp_path):
        """Unknown indicator names are a usage error."""
        solve(tmp_path, "--seed", "1")
        code = main(["metrics", "--inputs", str(tmp_path / "*.txt"), "--metrics", "n,gd"])
        assert code == EXIT_USAGE

import json

import numpy as np
import pytest

from obscheck.cli import (
    EXIT_INTERNAL,
    EXIT_NOT_OBSERVABLE,
    EXIT_OBSERVABLE,
    EXIT_USAGE,
    main,
)
from obscheck.samples import read_sample_csv

DESK_FLAGS = ["--placement-iters", "150"]


def run_cli(args):
    return main([str(a) for a in args])


class TestSamplesCommand:
    def test_writes_pair_file(self, tmp_path, capsys):
        out = tmp_path / "pair.csv"
        code = run_cli(["samples", "--dim", 1, "--count", 2, "--out", out])
        assert code == EXIT_OBSERVABLE
        points, meta = read_sample_csv(out)
        assert np.sort(points[:, 0]) == pytest.approx([-1.0, 1.0], abs=1e-9)
        assert meta["dim"] == 1 and meta["count"] == 2
        assert "lcd_distance" in capsys.readouterr().out

    def test_plane_five_points(self, tmp_path):
        out = tmp_path / "five.csv"
        code = run_cli(["samples", "--dim", 2, "--count", 5, "--out", out] + DESK_FLAGS)
        assert code == EXIT_OBSERVABLE
        points, _ = read_sample_csv(out)
        assert points.shape == (5, 2)
        flipped = np.array(sorted(map(tuple, -points)))
        straight = np.array(sorted(map(tuple, points)))
        assert np.array_equal(flipped, straight)

    def test_zero_count_is_usage_error(self, tmp_path, capsys):
        code = run_cli(["samples", "--dim", 1, "--count", 0, "--out", tmp_path / "x.csv"])
        assert code == EXIT_USAGE
        assert "error" in capsys.readouterr().err


class TestRunCommand:
    def test_observable_model_exit_zero(self, tmp_path):
        out = tmp_path / "report.json"
        plot = tmp_path / "estimates.csv"
        code = run_cli(
            ["run", "--model", "unknown_variance", "--T", "4", "--K", "10",
             "--out", out, "--plot", plot, "--cache-dir", tmp_path / "cache"] + DESK_FLAGS
        )
        assert code == EXIT_OBSERVABLE
        data = json.loads(out.read_text())
        assert data["verdict"] == "OBSERVABLE"
        assert plot.read_text().startswith("k,param,estimate")

    def test_unobservable_model_exit_three(self, tmp_path):
        out = tmp_path / "report.json"
        code = run_cli(
            ["run", "--model", "ratio_mean_scale_sqrt_ratio", "--T", "2", "--K", "6",
             "--out", out, "--cache-dir", tmp_path / "cache"] + DESK_FLAGS
        )
        assert code == EXIT_NOT_OBSERVABLE
        assert json.loads(out.read_text())["verdict"] == "NOT_OBSERVABLE"

    def test_missing_model_file_exit_one(self, tmp_path, capsys):
        code = run_cli(["run", "--model", tmp_path / "absent.json", "--out", tmp_path / "r.json"])
        assert code == EXIT_USAGE
        assert "error" in capsys.readouterr().err

    def test_malformed_expression_reports_position(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({
            "parameters": [{"name": "a", "true_value": 1.0}],
            "mean": "a +",
            "scale": "1",
        }))
        code = run_cli(["run", "--model", bad, "--out", tmp_path / "r.json"])
        assert code == EXIT_USAGE
        assert "offset" in capsys.readouterr().err

    def test_bad_horizon_list(self, tmp_path, capsys):
        code = run_cli(["run", "--model", "unknown_variance", "--T", "four",
                        "--out", tmp_path / "r.json"])
        assert code == EXIT_USAGE

    def test_env_cache_dir(self, tmp_path, monkeypatch):
        cache = tmp_path / "envcache"
        monkeypatch.setenv("OBSCHECK_CACHE_DIR", str(cache))
        out = tmp_path / "report.json"
        code = run_cli(["run", "--model", "unknown_variance", "--T", "2", "--K", "4",
                        "--out", out] + DESK_FLAGS)
        assert code == EXIT_OBSERVABLE
        assert list(cache.glob("samples_*.csv"))

    def test_byte_identical_across_thread_counts(self, tmp_path):
        outs = []
        for threads in (1, 4):
            out = tmp_path / f"report_{threads}.json"
            code = run_cli(
                ["run", "--model", "mean_and_variance", "--T", "4", "--K", "12",
                 "--threads", threads, "--out", out,
                 "--cache-dir", tmp_path / "cache"] + DESK_FLAGS
            )
            assert code == EXIT_OBSERVABLE
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]


class TestReportCommand:
    def test_renders_written_report(self, tmp_path, capsys):
        out = tmp_path / "report.json"
        run_cli(["run", "--model", "unknown_variance", "--T", "2", "--K", "4",
                 "--out", out, "--cache-dir", tmp_path / "cache"] + DESK_FLAGS)
        capsys.readouterr()
        code = run_cli(["report", out])
        assert code == EXIT_OBSERVABLE
        rendered = capsys.readouterr().out
        assert "Part I" in rendered and "verdict" in rendered

    def test_malformed_report_file(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert run_cli(["report", bad]) == EXIT_USAGE

    def test_missing_report_file(self, tmp_path):
        assert run_cli(["report", tmp_path / "none.json"]) == EXIT_USAGE


def test_unknown_subcommand_is_usage():
    assert run_cli(["frobnicate"]) == EXIT_USAGE


def test_internal_failure_exit_two(tmp_path, monkeypatch, capsys):
    import obscheck.cli as cli_module

    def explode(cfg):
        raise RuntimeError("boom")

    monkeypatch.setattr(cli_module, "run_study", explode)
    code = run_cli(["run", "--model", "unknown_variance", "--T", "2", "--K", "4",
                    "--out", tmp_path / "r.json", "--no-cache"])
    assert code == EXIT_INTERNAL
    assert "boom" in capsys.readouterr().err


def test_exit_codes_are_distinct():
    assert len({EXIT_OBSERVABLE, EXIT_USAGE, EXIT_INTERNAL, EXIT_NOT_OBSERVABLE}) == 4

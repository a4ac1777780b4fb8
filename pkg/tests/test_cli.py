import json
import os

import numpy as np
import pytest

from quasipot.cli import (EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, RunConfig,
                          main)


def run(tmp_path, *argv):
    cwd = os.getcwd()
    os.chdir(tmp_path)
    try:
        return main(list(argv))
    finally:
        os.chdir(cwd)


class TestRunConfig:
    def test_text_roundtrip(self):
        cfg = RunConfig(problem="linear:a=4", n=128, method="olim-tr",
                        K="7", domain="-2,2,-1,1", record_lengths=True,
                        out_prefix="x")
        assert RunConfig.from_text(cfg.to_text()) == cfg

    def test_comments_and_blanks(self):
        cfg = RunConfig.from_text("# comment\n\nproblem = linear\nn = 32\n")
        assert cfg.problem == "linear"
        assert cfg.n == 32

    def test_unknown_key(self):
        from quasipot.cli import ConfigError
        with pytest.raises(ConfigError):
            RunConfig.from_text("nope = 3\n")


class TestSolveCommand:
    def test_builtin_auto_k(self, tmp_path):
        code = run(tmp_path, "solve", "--problem", "linear", "--n", "128",
                   "--method", "olim-mid", "--K", "auto",
                   "--out-prefix", "t")
        assert code == EXIT_OK
        summary = json.loads((tmp_path / "t_summary.json").read_text())
        assert summary["K"] == 10
        assert summary["errors"]["max_abs"] < 0.01
        header = (tmp_path / "t_grid.csv").read_text().splitlines()[0]
        assert header == "i,j,x1,x2,U,state,update_length"

    def test_syntax_error_exit_code(self, tmp_path, capsys):
        code = run(tmp_path, "solve", "--b1", "x1 +", "--b2", "0",
                   "--n", "32", "--init-point", "0,0")
        assert code == EXIT_CONFIG
        assert "offset 4" in capsys.readouterr().err

    def test_unstable_equilibrium_exit_code(self, tmp_path):
        code = run(tmp_path, "solve", "--b1", "x1", "--b2", "x2",
                   "--n", "32", "--init-point", "0,0")
        assert code == EXIT_NUMERICAL

    def test_smallest_legal_mesh(self, tmp_path):
        code = run(tmp_path, "solve", "--problem", "linear", "--n", "2",
                   "--method", "olim-r", "--K", "1", "--out-prefix", "tiny")
        assert code == EXIT_OK
        assert (tmp_path / "tiny_grid.csv").exists()

    def test_missing_problem(self, tmp_path):
        assert run(tmp_path, "solve", "--n", "32") == EXIT_CONFIG

    def test_deterministic_artifacts(self, tmp_path):
        for prefix in ("a", "b"):
            assert run(tmp_path, "solve", "--problem", "linear",
                       "--n", "32", "--method", "olim-r", "--K", "3",
                       "--out-prefix", prefix) == EXIT_OK
        assert (tmp_path / "a_grid.csv").read_bytes() == \
            (tmp_path / "b_grid.csv").read_bytes()

    def test_raw_format(self, tmp_path):
        assert run(tmp_path, "solve", "--problem", "linear", "--n", "32",
                   "--method", "olim-r", "--K", "3", "--format", "raw",
                   "--record-lengths", "--out-prefix", "r") == EXIT_OK
        u = np.fromfile(tmp_path / "r_U.raw", dtype="<f8")
        assert u.size == 32 * 32
        meta = json.loads((tmp_path / "r_meta.json").read_text())
        assert meta["n1"] == 32
        assert (tmp_path / "r_lengths.raw").exists()

    def test_config_file_with_override(self, tmp_path):
        (tmp_path / "cfg.txt").write_text(
            "problem = linear\nn = 32\nmethod = olim-r\nK = 3\n"
            "out_prefix = fromfile\n")
        assert run(tmp_path, "solve", "--config", "cfg.txt",
                   "--out-prefix", "overridden") == EXIT_OK
        assert (tmp_path / "overridden_grid.csv").exists()


class TestMapCommand:
    def test_inline_solve_and_trace(self, tmp_path):
        code = run(tmp_path, "map", "--problem", "linear", "--n", "129",
                   "--method", "olim-mid", "--K", "8",
                   "--start", "0,0.5", "--out-prefix", "m")
        assert code == EXIT_OK
        summary = json.loads((tmp_path / "m_map_summary.json").read_text())
        assert summary["status"] == "reached_attractor"
        assert summary["geometric_action"] == pytest.approx(0.25, rel=0.10)
        first = (tmp_path / "m_path.csv").read_text().splitlines()[0]
        assert first == "x1,x2"

    def test_start_at_attractor(self, tmp_path):
        code = run(tmp_path, "map", "--problem", "linear", "--n", "65",
                   "--method", "olim-r", "--K", "3", "--start", "0,0",
                   "--out-prefix", "m0")
        assert code == EXIT_OK
        summary = json.loads((tmp_path / "m0_map_summary.json").read_text())
        assert summary["n_points"] == 1
        assert summary["geometric_action"] == 0.0

    def test_start_outside_domain(self, tmp_path):
        code = run(tmp_path, "map", "--problem", "linear", "--n", "65",
                   "--method", "olim-r", "--K", "3", "--start", "9,9")
        assert code == EXIT_CONFIG

    def test_from_saved_grid(self, tmp_path):
        assert run(tmp_path, "solve", "--problem", "linear", "--n", "129",
                   "--method", "olim-mid", "--K", "8", "--format", "raw",
                   "--out-prefix", "g") == EXIT_OK
        code = run(tmp_path, "map", "--grid", "g", "--start", "0,0.5",
                   "--out-prefix", "gm")
        assert code == EXIT_OK
        summary = json.loads((tmp_path / "gm_map_summary.json").read_text())
        assert summary["geometric_action"] == pytest.approx(0.25, rel=0.10)


class TestBenchCommand:
    def test_empty_n_list(self, tmp_path):
        code = run(tmp_path, "bench", "--suite", "linear", "--n-list", "",
                   "--methods", "olim-r", "--out-prefix", "e")
        assert code == EXIT_OK
        rows = (tmp_path / "e_bench.csv").read_text().splitlines()
        assert rows == ["problem,method,n,K,max_abs,rms,seconds,error"]

    def test_small_suite(self, tmp_path):
        code = run(tmp_path, "bench", "--suite", "linear",
                   "--n-list", "64", "--K", "3", "--methods", "olim-r",
                   "--out-prefix", "s")
        assert code == EXIT_OK
        report = json.loads((tmp_path / "s_bench.json").read_text())
        assert len(report["rows"]) == 1
        row = report["rows"][0]
        assert row["method"] == "olim-r" and row["n"] == 64
        assert np.isfinite(row["max_abs"])
        assert (tmp_path / "s_bench.txt").exists()

    def test_bad_method(self, tmp_path):
        assert run(tmp_path, "bench", "--suite", "linear", "--n-list", "32",
                   "--methods", "fmm") == EXIT_CONFIG

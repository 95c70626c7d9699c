from math import pi

import pytest

from app import __version__
from app.main import build_config, cli_main
from app.utils.report_utils import SPECTRUM_COLUMNS, ReportUtils

SMALL = ["--N", "2", "--Q", "2", "--Np", "6"]


class TestSolveCommand:
    def test_defaults_write_report(self, data_dir):
        assert cli_main(["solve"]) == 0
        rows = ReportUtils.read_report(str(data_dir / "report.csv"))
        assert len(rows) == 1
        assert rows[0]["solver"] == "lowrank"
        assert rows[0]["converged"] is True

    def test_both_solvers_with_pretty_output(self, tmp_path, capsys):
        output = tmp_path / "both.csv"
        code = cli_main(["solve", *SMALL, "--c", "1.5pi", "--solver", "both", "--pretty", "--output", str(output)])
        assert code == 0
        text = capsys.readouterr().out
        assert "P(2,2,6,1.5pi)" in text
        assert "discrepancy=" in text
        rows = ReportUtils.read_report(str(output))
        assert [r["solver"] for r in rows] == ["lowrank", "full"]
        assert rows[0]["c"] == pytest.approx(1.5 * pi)

    def test_c_pi_flag(self, tmp_path):
        output = tmp_path / "report.csv"
        assert cli_main(["solve", *SMALL, "--c", "1.5", "--c-pi", "--output", str(output)]) == 0
        assert ReportUtils.read_report(str(output))[0]["c"] == pytest.approx(1.5 * pi)

    def test_not_converged(self, tmp_path):
        output = tmp_path / "report.csv"
        code = cli_main(["solve", *SMALL, "--tol", "1e-14", "--max-it", "1", "--output", str(output)])
        assert code == 1
        assert ReportUtils.read_report(str(output))[0]["converged"] is False

    def test_invalid_mesh(self, tmp_path, capsys):
        assert cli_main(["solve", "--Np", "1", "--output", str(tmp_path / "r.csv")]) == 2
        assert "Error" in capsys.readouterr().err

    def test_unknown_flag(self):
        assert cli_main(["solve", "--bogus"]) == 2

    def test_help(self, capsys):
        assert cli_main(["solve", "--help"]) == 0
        assert "--Np" in capsys.readouterr().out

    def test_config_file_with_override(self, tmp_path):
        config = tmp_path / "case.env"
        config.write_text("N=2\nQ=2\nNp=5\nc=1.5pi\n", encoding="utf-8")
        cfg = build_config(str(config), Np=6, Q=None)
        assert (cfg.N, cfg.Q, cfg.Np, cfg.c_pi) == (2, 2, 6, True)
        output = tmp_path / "report.csv"
        assert cli_main(["solve", "--config", str(config), "--Np", "6", "--output", str(output)]) == 0
        assert ReportUtils.read_report(str(output))[0]["Np"] == 6

    def test_missing_config_file(self, tmp_path):
        assert cli_main(["solve", "--config", str(tmp_path / "missing.env")]) == 2


class TestBenchCommand:
    @pytest.fixture
    def sweep(self, tmp_path):
        path = tmp_path / "sweep.txt"
        path.write_text("# 两个小算例\nNp=5\nNp=4 c=1.5pi\n", encoding="utf-8")
        return path

    @pytest.mark.parametrize("extra", [[], ["--distributed"]])
    def test_sweep(self, tmp_path, sweep, extra):
        output = tmp_path / "bench.csv"
        code = cli_main(["bench", "--N", "1", "--Q", "2", "--sweep", str(sweep), "--output", str(output), *extra])
        assert code == 0
        rows = ReportUtils.read_report(str(output))
        assert [(r["N"], r["Np"]) for r in rows] == [(1, 5), (1, 4)]
        assert rows[1]["c"] == pytest.approx(1.5 * pi)

    def test_requires_sweep(self):
        assert cli_main(["bench"]) == 2

    def test_bad_sweep_line(self, tmp_path):
        path = tmp_path / "sweep.txt"
        path.write_text("Np=5 oops\n", encoding="utf-8")
        assert cli_main(["bench", "--sweep", str(path), "--output", str(tmp_path / "r.csv")]) == 2


class TestSpectrumCommand:
    def test_writes_all_eigenvalues(self, tmp_path, capsys):
        output = tmp_path / "spectrum.csv"
        code = cli_main(["spectrum", "--N", "2", "--Q", "2", "--Np", "21", "--c", "4.712", "--output", str(output)])
        assert code == 0
        assert output.read_text(encoding="utf-8").splitlines()[0] == ",".join(SPECTRUM_COLUMNS)
        rows = ReportUtils.read_table(str(output))
        assert len(rows) == 420
        assert min(r["im"] for r in rows) > 0
        assert "420 eigenvalues" in capsys.readouterr().out

    def test_default_path(self, data_dir):
        assert cli_main(["spectrum", "--Np", "5"]) == 0
        assert (data_dir / "spectrum.csv").is_file()


class TestVerifyExistenceCommand:
    def test_decay_table(self, tmp_path, capsys):
        output = tmp_path / "decay.csv"
        assert cli_main(["verify-existence", "--k", "4", "--k", "9", "--output", str(output)]) == 0
        rows = ReportUtils.read_table(str(output))
        assert [int(r["k"]) for r in rows] == [4, 9]
        assert rows[0]["error"] > rows[1]["error"]
        assert "sinc slope" in capsys.readouterr().out


def test_version(capsys):
    assert cli_main(["--version"]) == 0
    assert __version__ in capsys.readouterr().out

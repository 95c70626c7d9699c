import numpy as np
import pytest

from app.core.errors import ConfigurationError
from app.models.solver import PrecondStorage, SolveStatus, SolverKind, TimingCategory
from app.schemas.case import CaseReport, ProblemConfig
from app.schemas.solver import SolveReport
from app.utils.config_file import load_config_file, load_sweep_file, parse_sweep_line
from app.utils.report_utils import REPORT_COLUMNS, ReportUtils, emit_report


def _case_report() -> CaseReport:
    shares = {
        TimingCategory.PRECONDITIONER: 0.4,
        TimingCategory.TRUNCATION: 0.2,
        TimingCategory.TRACE: 0.1,
        TimingCategory.MATVEC: 0.2,
        TimingCategory.OTHER: 0.1,
    }
    lowrank = SolveReport(
        solver=SolverKind.LOWRANK,
        iterations=3,
        converged=True,
        status=SolveStatus.CONVERGED,
        residual_history=[1.0, 0.1, 0.01, 1e-5],
        rank_history=[2, 3, 3],
        avg_rank=8 / 3,
        time_shares=shares,
        nnz_operator=1200,
        nnz_preconditioner=340,
        storage=PrecondStorage.FACTORIZED,
        total_time=0.25,
    )
    full = lowrank.model_copy(update={"solver": SolverKind.FULL, "rank_history": [], "avg_rank": None})
    return CaseReport(
        config=ProblemConfig(N=2, Q=2, Np=6, c=1.5, c_pi=True),
        J=30,
        Q_s=6,
        size_A=180,
        positivity_bound=4.9,
        reports=[lowrank, full],
        discrepancy=1.5e-5,
    )


class TestEmitReport:
    def test_empty_report_is_header_only(self, tmp_path):
        path = tmp_path / "report.csv"
        ReportUtils.emit_report([], str(path))
        assert path.read_text(encoding="utf-8").strip() == ",".join(REPORT_COLUMNS)

    def test_one_row_per_solver(self, tmp_path):
        path = str(tmp_path / "report.csv")
        ReportUtils.emit_report([_case_report()], path)
        rows = ReportUtils.read_report(path)
        assert [row["solver"] for row in rows] == ["lowrank", "full"]

    def test_round_trip(self, tmp_path):
        path = str(tmp_path / "report.csv")
        case = _case_report()
        ReportUtils.emit_report([case], path)
        lowrank, full = ReportUtils.read_report(path)
        assert (lowrank["N"], lowrank["Q"], lowrank["Np"]) == (2, 2, 6)
        assert lowrank["c"] == case.config.wavenumber
        assert lowrank["iterations"] == 3
        assert lowrank["converged"] is True
        assert lowrank["avg_rank"] == pytest.approx(8 / 3)
        assert lowrank["share_precond"] == pytest.approx(0.4)
        assert lowrank["nnz_op"] == 1200
        assert lowrank["nnz_precond"] == 340
        assert lowrank["size_A"] == 180
        assert lowrank["discrepancy"] == pytest.approx(1.5e-5)
        assert full["avg_rank"] is None

    def test_default_path(self, data_dir):
        path = emit_report([_case_report()])
        assert path == str(data_dir / "report.csv")
        assert len(ReportUtils.read_report(path)) == 2


class TestTables:
    def test_spectrum_round_trip(self, tmp_path):
        values = np.array([1.0 + 0.5j, 2.0 - 1e-12j, 3.25 + 0j])
        path = ReportUtils.write_spectrum(values, str(tmp_path / "spectrum.csv"))
        rows = ReportUtils.read_table(path)
        np.testing.assert_array_equal([r["re"] + 1j * r["im"] for r in rows], values)

    def test_decay_table(self, tmp_path):
        path = ReportUtils.write_decay([(4, 1e-2), (9, 1e-4)], str(tmp_path / "nested" / "decay.csv"))
        rows = ReportUtils.read_table(path)
        assert [(int(r["k"]), r["error"]) for r in rows] == [(4, 1e-2), (9, 1e-4)]

    def test_pretty_tables(self):
        text = ReportUtils.render_tables([_case_report()])
        assert "P(2,2,6,1.5pi)" in text
        assert "lowrank" in text and "full" in text
        assert "discrepancy=1.500e-05" in text
        assert "nnz(precond, factorized)=340" in text

    def test_storage_summary(self):
        summary = ReportUtils.storage_summary(_case_report().reports[0])
        assert summary == "nnz(precond, factorized)=340, nnz(A)=1200, ratio=0.283"


class TestConfigFile:
    def test_load_with_comments(self, tmp_path):
        path = tmp_path / "case.env"
        path.write_text("# 小算例\nN=3\nQ=2  # 阶数\nc=1.5pi\n", encoding="utf-8")
        values = load_config_file(str(path))
        assert values == {"N": "3", "Q": "2", "c": "1.5pi"}
        cfg = ProblemConfig.from_options(**values)
        assert (cfg.N, cfg.Q, cfg.c_pi) == (3, 2, True)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_config_file(str(tmp_path / "missing.env"))

    def test_key_without_value(self, tmp_path):
        path = tmp_path / "case.env"
        path.write_text("N\n", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            load_config_file(str(path))

    def test_none_path(self):
        assert load_config_file(None) == {}

    def test_sweep_line(self):
        assert parse_sweep_line("N=2 Q=3 c=1.5pi  # 注释") == {"N": "2", "Q": "3", "c": "1.5pi"}
        assert parse_sweep_line("   # 只有注释") == {}
        with pytest.raises(ConfigurationError):
            parse_sweep_line("N=2 broken")

    def test_sweep_file(self, tmp_path):
        path = tmp_path / "sweep.txt"
        path.write_text("# 扫描\nNp=6\n\nNp=11 c=1.5pi\n", encoding="utf-8")
        assert load_sweep_file(str(path)) == [{"Np": "6"}, {"Np": "11", "c": "1.5pi"}]

    def test_missing_sweep_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_sweep_file(str(tmp_path / "missing.txt"))

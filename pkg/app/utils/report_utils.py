import csv
import os
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..core.config import settings
from ..core.logging import logger
from ..models.solver import TimingCategory
from ..schemas.case import CaseReport
from ..schemas.solver import SolveReport

REPORT_COLUMNS = [
    "N", "Q", "Np", "c", "solver", "iterations", "converged", "avg_rank",
    "time_total_s", "share_precond", "share_trunc", "share_trace", "share_matvec",
    "nnz_op", "nnz_precond", "size_A", "discrepancy",
]

SPECTRUM_COLUMNS = ["re", "im"]
DECAY_COLUMNS = ["k", "error"]

_INT_COLUMNS = {"N", "Q", "Np", "iterations", "nnz_op", "nnz_precond", "size_A"}
_FLOAT_COLUMNS = {
    "c", "avg_rank", "time_total_s", "share_precond", "share_trunc",
    "share_trace", "share_matvec", "discrepancy",
}


class ReportUtils:
    """报告与数据表的读写工具类"""

    @staticmethod
    def _ensure_parent(path: str):
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)

    @staticmethod
    def _write_csv(path: str, columns: Sequence[str], rows: Iterable[Sequence[Any]]):
        ReportUtils._ensure_parent(path)
        try:
            with open(path, "w", newline="", encoding="utf-8") as f:
                writer = csv.writer(f)
                writer.writerow(columns)
                writer.writerows(rows)
        except OSError as e:
            logger.error(f"Failed to write {path}: {str(e)}")
            raise

    @staticmethod
    def report_rows(reports: Sequence[CaseReport]) -> List[Dict[str, Any]]:
        """
        每个算例的每个求解器一行

        Args:
            reports: 算例报告列表

        Returns:
            List[Dict[str, Any]]: 以 REPORT_COLUMNS 为键的行
        """
        rows = []
        for case in reports:
            for report in case.reports:
                rows.append({
                    "N": case.config.N,
                    "Q": case.config.Q,
                    "Np": case.config.Np,
                    "c": case.config.wavenumber,
                    "solver": report.solver.value,
                    "iterations": report.iterations,
                    "converged": report.converged,
                    "avg_rank": report.avg_rank if report.rank_history else None,
                    "time_total_s": report.total_time,
                    "share_precond": report.share(TimingCategory.PRECONDITIONER),
                    "share_trunc": report.share(TimingCategory.TRUNCATION),
                    "share_trace": report.share(TimingCategory.TRACE),
                    "share_matvec": report.share(TimingCategory.MATVEC),
                    "nnz_op": report.nnz_operator,
                    "nnz_precond": report.nnz_preconditioner,
                    "size_A": case.size_A,
                    "discrepancy": case.discrepancy,
                })
        return rows

    @staticmethod
    def emit_report(reports: Sequence[CaseReport], path: str) -> str:
        """
        写出报告CSV，空列表时只有表头

        Args:
            reports: 算例报告列表
            path: 输出路径

        Returns:
            str: 输出路径
        """
        rows = ReportUtils.report_rows(reports)
        ReportUtils._write_csv(
            path,
            REPORT_COLUMNS,
            ([("" if row[c] is None else row[c]) for c in REPORT_COLUMNS] for row in rows),
        )
        logger.info(f"Wrote report with {len(rows)} rows to {path}")
        return path

    @staticmethod
    def read_report(path: str) -> List[Dict[str, Any]]:
        """读回报告CSV并恢复字段类型"""
        rows = []
        with open(path, newline="", encoding="utf-8") as f:
            for raw in csv.DictReader(f):
                row: Dict[str, Any] = {}
                for key, value in raw.items():
                    if value == "":
                        row[key] = None
                    elif key in _INT_COLUMNS:
                        row[key] = int(value)
                    elif key in _FLOAT_COLUMNS:
                        row[key] = float(value)
                    elif key == "converged":
                        row[key] = value == "True"
                    else:
                        row[key] = value
                rows.append(row)
        return rows

    @staticmethod
    def write_spectrum(eigenvalues: np.ndarray, path: str) -> str:
        """特征值CSV：re,im 每行一个"""
        values = np.asarray(eigenvalues, dtype=complex)
        ReportUtils._write_csv(path, SPECTRUM_COLUMNS, ((repr(float(z.real)), repr(float(z.imag))) for z in values))
        logger.info(f"Wrote {values.size} eigenvalues to {path}")
        return path

    @staticmethod
    def write_decay(rows: Sequence[Tuple[int, float]], path: str) -> str:
        """误差衰减CSV：k,error"""
        ReportUtils._write_csv(path, DECAY_COLUMNS, ((int(k), repr(float(e))) for k, e in rows))
        return path

    @staticmethod
    def read_table(path: str) -> List[Dict[str, float]]:
        """读回数值CSV（谱或误差衰减）"""
        with open(path, newline="", encoding="utf-8") as f:
            return [{key: float(value) for key, value in row.items()} for row in csv.DictReader(f)]

    @staticmethod
    def storage_summary(report: SolveReport) -> str:
        """预条件子存储与显式组装 A 的非零元对比"""
        ratio = report.nnz_preconditioner / report.nnz_operator if report.nnz_operator else float("nan")
        storage = report.storage.value if report.storage else "-"
        return (
            f"nnz(precond, {storage})={report.nnz_preconditioner}, "
            f"nnz(A)={report.nnz_operator}, ratio={ratio:.3f}"
        )

    @staticmethod
    def render_tables(reports: Sequence[CaseReport]) -> str:
        """
        按 N,Q,Np,c 分行、各求解器分列的可读表格

        Args:
            reports: 算例报告列表

        Returns:
            str: 文本表格
        """
        header = (
            f"{'case':<22}{'solver':<9}{'it':>5}{'conv':>6}{'rank':>8}{'time[s]':>10}"
            f"{'prec%':>8}{'trunc%':>8}{'trace%':>8}{'mv%':>8}{'size(A)':>10}"
        )
        lines = [header, "-" * len(header)]
        for case in reports:
            for report in case.reports:
                rank = f"{report.avg_rank:.1f}" if report.rank_history else "-"
                lines.append(
                    f"{case.config.label:<22}{report.solver.value:<9}{report.iterations:>5}"
                    f"{'yes' if report.converged else 'no':>6}{rank:>8}{report.total_time:>10.3f}"
                    f"{100 * report.share(TimingCategory.PRECONDITIONER):>8.1f}"
                    f"{100 * report.share(TimingCategory.TRUNCATION):>8.1f}"
                    f"{100 * report.share(TimingCategory.TRACE):>8.1f}"
                    f"{100 * report.share(TimingCategory.MATVEC):>8.1f}"
                    f"{case.size_A:>10}"
                )
                lines.append(f"{'':<22}{ReportUtils.storage_summary(report)}")
            if case.discrepancy is not None:
                lines.append(f"{'':<22}discrepancy={case.discrepancy:.3e}")
        return "\n".join(lines)


def emit_report(reports: Sequence[CaseReport], path: Optional[str] = None) -> str:
    """写出报告CSV，默认路径为 settings.DEFAULT_REPORT_PATH"""
    return ReportUtils.emit_report(reports, path or settings.DEFAULT_REPORT_PATH)

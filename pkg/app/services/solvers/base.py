from abc import ABC, abstractmethod
from contextlib import contextmanager
from dataclasses import dataclass
from functools import cached_property
from time import perf_counter
from typing import Dict, Optional, Union

import numpy as np
from scipy import sparse

from ...core.config import settings
from ...models.solver import SolverKind, TimingCategory
from ...schemas.solver import SolveReport, SolverConfig
from ...utils.lowrank_utils import LowRankFactor, unvec
from ..galerkin_service import KronOperator, MeanPreconditioner, build_full_A, operator_nnz


class OperationTimer:
    """按操作类别累计耗时（单调时钟）"""

    INSTRUMENTED = (
        TimingCategory.PRECONDITIONER,
        TimingCategory.TRUNCATION,
        TimingCategory.TRACE,
        TimingCategory.MATVEC,
    )

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self.elapsed: Dict[TimingCategory, float] = {c: 0.0 for c in self.INSTRUMENTED}
        self._start = perf_counter()

    @contextmanager
    def measure(self, category: TimingCategory):
        if not self.enabled:
            yield
            return
        start = perf_counter()
        try:
            yield
        finally:
            self.elapsed[category] += perf_counter() - start

    @property
    def total(self) -> float:
        return perf_counter() - self._start

    def shares(self, total: float) -> Dict[TimingCategory, float]:
        """各类耗时占比，其余时间计入 other"""
        if not self.enabled or total <= 0.0:
            return {}
        shares = {c: min(self.elapsed[c] / total, 1.0) for c in self.INSTRUMENTED}
        instrumented = sum(shares.values())
        if instrumented > 1.0:
            shares = {c: s / instrumented for c, s in shares.items()}
            instrumented = 1.0
        shares[TimingCategory.OTHER] = 1.0 - instrumented
        return shares


class GalerkinSystem:
    """一个已组装的随机Galerkin线性系统：算子、预条件子和低秩右端项"""

    def __init__(
        self,
        op: KronOperator,
        M: MeanPreconditioner,
        B: LowRankFactor,
        assembly_limit: Optional[int] = None,
    ):
        self.op = op
        self.M = M
        self.B = B
        self.assembly_limit = settings.FULL_ASSEMBLY_LIMIT if assembly_limit is None else assembly_limit

    @cached_property
    def full_matrix(self) -> sparse.csr_matrix:
        """显式组装的 A（首次访问时构造）"""
        return build_full_A(self.op, self.assembly_limit)

    @property
    def rhs_vector(self) -> np.ndarray:
        return self.B.to_vector()

    @cached_property
    def nnz_operator(self) -> int:
        if "full_matrix" in self.__dict__:
            return int(self.full_matrix.nnz)
        return operator_nnz(self.op, self.assembly_limit)


@dataclass
class SolveOutcome:
    """求解结果：解（低秩因子或向量）与统计报告"""

    solution: Union[LowRankFactor, np.ndarray]
    report: SolveReport
    dims: tuple

    def dense(self) -> np.ndarray:
        """J x Q_s 稠密解"""
        if isinstance(self.solution, LowRankFactor):
            return self.solution.to_dense()
        return unvec(self.solution, *self.dims)


class LinearSolver(ABC):
    """线性求解器基类"""

    @property
    @abstractmethod
    def solver_name(self) -> SolverKind:
        """求解器名称"""
        pass

    @abstractmethod
    def solve(self, system: GalerkinSystem, cfg: SolverConfig) -> SolveOutcome:
        """
        求解系统

        Args:
            system: 已组装的系统
            cfg: 求解器配置

        Returns:
            SolveOutcome: 解与报告
        """
        pass

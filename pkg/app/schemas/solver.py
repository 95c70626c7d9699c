from typing import Dict, List, Optional
from pydantic import BaseModel, Field, model_validator
from ..core.config import settings
from ..models.solver import (
    MatvecMode,
    PrecondStorage,
    SolveStatus,
    SolverKind,
    TimingCategory,
)


class SolverConfig(BaseModel):
    """Krylov求解器配置"""
    tol: float = Field(default=settings.DEFAULT_TOL, gt=0, description="相对残差停止阈值（Frobenius范数）")
    eps_rel: float = Field(default=settings.DEFAULT_EPS_REL, ge=0, description="截断相对精度")
    max_it: int = Field(default=settings.DEFAULT_MAX_IT, ge=1, description="最大迭代次数")
    record_timings: bool = Field(default=True, description="是否记录各类操作的耗时")
    matvec_mode: MatvecMode = Field(default=MatvecMode.FACTORED, description="低秩矩阵向量乘方式")
    precond_storage: PrecondStorage = Field(default=PrecondStorage.FACTORIZED, description="预条件子存储方式")
    audit_true_residual: bool = Field(default=False, description="每步重新计算真实残差（仅用于小规模检查）")


class SolveReport(BaseModel):
    """单次求解的统计报告"""
    solver: SolverKind = Field(..., description="求解器类型")
    iterations: int = Field(default=0, ge=0, description="迭代次数")
    converged: bool = Field(default=False, description="是否收敛")
    status: SolveStatus = Field(default=SolveStatus.MAX_ITERATIONS, description="求解状态")
    residual_history: List[float] = Field(default_factory=list, description="每步残差范数 ||R_k||_F")
    true_residual_history: List[float] = Field(default_factory=list, description="每步真实残差（审计模式）")
    rank_history: List[int] = Field(default_factory=list, description="每步截断后 X_k 的秩")
    avg_rank: Optional[float] = Field(default=None, description="每步平均秩")
    time_shares: Dict[TimingCategory, float] = Field(default_factory=dict, description="各类操作耗时占比")
    nnz_operator: int = Field(default=0, ge=0, description="显式组装的 A 的非零元个数")
    nnz_preconditioner: int = Field(default=0, ge=0, description="预条件子的存储非零元个数")
    storage: Optional[PrecondStorage] = Field(default=None, description="预条件子存储方式")
    total_time: float = Field(default=0.0, ge=0, description="总耗时（秒）")

    @model_validator(mode='after')
    def validate_report(self):
        """验证报告的一致性"""
        instrumented = sum(
            share for category, share in self.time_shares.items()
            if category is not TimingCategory.OTHER
        )
        if instrumented > 1.0 + 1e-9:
            raise ValueError(f"Instrumented time shares sum to {instrumented:.6f} > 1")
        if self.iterations > 0 and not self.residual_history:
            raise ValueError("residual_history must be non-empty when iterations > 0")
        return self

    def share(self, category: TimingCategory) -> float:
        """获取某类操作的耗时占比，不存在时为0"""
        return self.time_shares.get(category, 0.0)

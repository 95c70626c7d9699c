import re
from math import pi
from typing import Any, Dict, List, Optional, Tuple
from pydantic import BaseModel, ConfigDict, Field, ValidationError, computed_field, field_validator, model_validator
from ..core.config import settings
from ..core.errors import ConfigurationError
from ..models.solver import MatvecMode, PrecondStorage, SolverSelection
from ..utils.fem_utils import EDGES, TRIANGLE_RULES
from .solver import SolveReport, SolverConfig

# 形如 "1.5pi"、"1.5π"、"pi" 的波数表达式
_PI_PATTERN = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?\s*\*?\s*(?:pi|π)\s*$", re.IGNORECASE)


class ProblemConfig(BaseModel):
    """算例 P(N, Q, Np, c) 的配置"""
    model_config = ConfigDict(extra="forbid")

    N: int = Field(default=2, ge=1, description="KL展开截断长度")
    Q: int = Field(default=2, ge=0, description="混沌多项式最高总阶数")
    Np: int = Field(default=6, ge=3, description="每个方向的网格点数")
    c: float = Field(default=0.0, ge=0, description="波数（c_pi 为真时为 pi 的倍数）")
    c_pi: bool = Field(default=False, description="把 c 解释为 pi 的倍数")
    mean: float = Field(default=settings.DEFAULT_MEAN, gt=0, description="系数均值")
    sigma: float = Field(default=settings.DEFAULT_SIGMA, ge=0, description="系数标准差")
    length: float = Field(default=settings.DEFAULT_LENGTH, gt=0, description="相关长度")
    source: float = Field(default=settings.DEFAULT_SOURCE, description="源项 f（常数）")
    dirichlet_value: float = Field(default=settings.DEFAULT_DIRICHLET_VALUE, description="Dirichlet 边界值 g（常数）")
    dirichlet_edges: List[str] = Field(default_factory=lambda: ["left"], description="Dirichlet 边")
    quadrature: str = Field(default="midpoint", description="系数求积规则")
    tol: float = Field(default=settings.DEFAULT_TOL, gt=0, description="停止阈值")
    eps_rel: float = Field(default=settings.DEFAULT_EPS_REL, ge=0, description="截断精度")
    max_it: int = Field(default=settings.DEFAULT_MAX_IT, ge=1, description="最大迭代次数")
    solver: SolverSelection = Field(default=SolverSelection.LOWRANK, description="求解器选择")
    matvec_mode: MatvecMode = Field(default=MatvecMode.FACTORED, description="低秩矩阵向量乘方式")
    precond_storage: PrecondStorage = Field(default=PrecondStorage.FACTORIZED, description="预条件子存储方式")
    seed: int = Field(default=0, ge=0, description="随机种子（存在性实验的随机算例）")
    output: Optional[str] = Field(default=None, description="报告输出路径")

    @model_validator(mode="before")
    @classmethod
    def parse_pi_wavenumber(cls, data: Any) -> Any:
        """把 "1.5pi" 形式的波数转为数值并置 c_pi"""
        if isinstance(data, dict) and "wavenumber" in data:
            # 序列化结果回读时忽略计算字段
            data = {key: value for key, value in data.items() if key != "wavenumber"}
        if isinstance(data, dict) and isinstance(data.get("c"), str):
            match = _PI_PATTERN.match(data["c"])
            if match:
                data = dict(data)
                data["c"] = float(match.group(1)) if match.group(1) else 1.0
                data["c_pi"] = True
        return data

    @field_validator("dirichlet_edges", mode="before")
    @classmethod
    def validate_edges(cls, v: Any) -> Any:
        """支持逗号分隔的字符串"""
        if isinstance(v, str):
            v = [edge.strip() for edge in v.split(",") if edge.strip()]
        unknown = [edge for edge in v if edge not in EDGES]
        if unknown:
            raise ValueError(f"Unknown boundary edges: {unknown}")
        return list(dict.fromkeys(v))

    @field_validator("quadrature")
    @classmethod
    def validate_quadrature(cls, v: str) -> str:
        if v not in TRIANGLE_RULES:
            raise ValueError(f"Unknown quadrature rule '{v}', expected one of {sorted(TRIANGLE_RULES)}")
        return v

    @computed_field
    @property
    def wavenumber(self) -> float:
        """实际波数"""
        return self.c * pi if self.c_pi else self.c

    @property
    def label(self) -> str:
        """算例标签 P(N,Q,Np,c)"""
        c = f"{self.c:g}pi" if self.c_pi else f"{self.c:g}"
        return f"P({self.N},{self.Q},{self.Np},{c})"

    def solver_config(self) -> SolverConfig:
        """求解器配置"""
        return SolverConfig(
            tol=self.tol,
            eps_rel=self.eps_rel,
            max_it=self.max_it,
            matvec_mode=self.matvec_mode,
            precond_storage=self.precond_storage,
        )

    @classmethod
    def from_options(cls, **options: Any) -> "ProblemConfig":
        """
        由配置文件或命令行参数构造，校验失败时抛出 ConfigurationError

        Args:
            **options: 字段值，None 表示未指定

        Returns:
            ProblemConfig: 配置对象
        """
        options = {key: value for key, value in options.items() if value is not None}
        try:
            return cls(**options)
        except ValidationError as e:
            raise ConfigurationError(f"Invalid problem configuration: {e}") from e


class CaseReport(BaseModel):
    """一个算例的结果（对应表格中的一行或多行）"""
    config: ProblemConfig = Field(..., description="算例配置")
    J: int = Field(..., ge=0, description="自由空间自由度个数")
    Q_s: int = Field(..., ge=1, description="混沌基函数个数")
    size_A: int = Field(..., ge=0, description="系统维数 J*Q_s")
    positivity_bound: float = Field(..., description="系数正定性下界估计")
    reports: List[SolveReport] = Field(default_factory=list, description="各求解器的报告")
    discrepancy: Optional[float] = Field(default=None, ge=0, description="求解器之间解的最大相对差")

    @model_validator(mode='after')
    def validate_discrepancy(self):
        """两个及以上求解器运行时才有 discrepancy"""
        if len(self.reports) >= 2 and self.discrepancy is None:
            raise ValueError("discrepancy is required when at least two solvers ran")
        if len(self.reports) < 2 and self.discrepancy is not None:
            raise ValueError("discrepancy requires at least two solvers")
        return self

    @property
    def converged(self) -> bool:
        return all(report.converged for report in self.reports)


class DecayPoint(BaseModel):
    """误差衰减表的一行"""
    k: int = Field(..., ge=1, description="求积参数")
    error: float = Field(..., ge=0, description="相对误差")


class ExistenceReport(BaseModel):
    """存在性实验汇总"""
    sinc_decay: List[DecayPoint] = Field(default_factory=list, description="sinc 求积逆作用的误差")
    sinc_slope: float = Field(..., description="log(误差) 对 sqrt(k) 的斜率")
    sinc_rotation: str = Field(default="none", description="求积使用的旋转")
    smw_cases: int = Field(default=0, ge=0, description="随机 SMW 算例个数")
    smw_max_residual: float = Field(default=0.0, ge=0, description="SMW 最大相对残差")
    reconstruction_error: float = Field(..., ge=0, description="L + U V^T 与 A 的最大差")
    g_ranks: List[int] = Field(default_factory=list, description="G_i 的数值秩")
    update_rank: int = Field(default=0, ge=0, description="修正项 U V^T 的列数")
    exact_smw_error: float = Field(..., ge=0, description="精确 L 求解时 SMW 的误差")
    splitting_decay: List[DecayPoint] = Field(default_factory=list, description="求积近似 L^{-1} 的误差")
    splitting_slope: Optional[float] = Field(default=None, description="log(误差) 对 sqrt(k) 的斜率")

    def decay_rows(self) -> List[Tuple[int, float]]:
        return [(p.k, p.error) for p in self.sinc_decay]

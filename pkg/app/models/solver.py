from enum import Enum, IntEnum
from typing import List


class SolverKind(str, Enum):
    """求解器类型枚举"""
    LOWRANK = "lowrank"
    FULL = "full"
    DIRECT = "direct"


class SolverSelection(str, Enum):
    """命令行/配置中的求解器选择"""
    LOWRANK = "lowrank"
    FULL = "full"
    BOTH = "both"
    DIRECT = "direct"

    def expand(self) -> List[SolverKind]:
        """展开为要运行的求解器列表"""
        if self is SolverSelection.BOTH:
            return [SolverKind.LOWRANK, SolverKind.FULL]
        return [SolverKind(self.value)]


class SolveStatus(str, Enum):
    """求解状态枚举"""
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"
    BREAKDOWN = "breakdown"


class TimingCategory(str, Enum):
    """计时分类（预条件、截断、迹、矩阵向量乘）"""
    PRECONDITIONER = "preconditioner"
    TRUNCATION = "truncation"
    TRACE = "trace"
    MATVEC = "matvec"
    OTHER = "other"


class MatvecMode(str, Enum):
    """低秩矩阵向量乘的实现方式"""
    FACTORED = "factored"  # 因子拼接，秩为 (N+1)*r
    DENSE = "dense"        # U = sum K_i X G_i, V = I


class PrecondStorage(str, Enum):
    """均值预条件子的存储方式"""
    FACTORIZED = "factorized"  # 稀疏LU分解
    INVERSE = "inverse"        # 显式稠密逆


class NodeKind(IntEnum):
    """网格节点分类"""
    INTERIOR = 0
    ROBIN = 1
    DIRICHLET = 2

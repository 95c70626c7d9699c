from time import perf_counter
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from . import register_solver
from .base import GalerkinSystem, LinearSolver, SolveOutcome
from ...core.config import settings
from ...core.errors import DimensionMismatchError, SingularMatrixError, SizeLimitError
from ...core.logging import logger
from ...models.solver import SolveStatus, SolverKind
from ...schemas.solver import SolveReport, SolverConfig


def direct_solve(A: sparse.spmatrix, b: np.ndarray, limit: Optional[int] = None) -> np.ndarray:
    """
    稀疏LU直接求解（参考解）

    Args:
        A: 系统矩阵
        b: 右端向量
        limit: 维数上限，默认 settings.DIRECT_SOLVE_LIMIT

    Returns:
        np.ndarray: 解向量

    Raises:
        SizeLimitError: 维数超限
        SingularMatrixError: 矩阵奇异
    """
    limit = settings.DIRECT_SOLVE_LIMIT if limit is None else limit
    b = np.asarray(b, dtype=complex)
    if A.shape[0] != A.shape[1] or A.shape[1] != b.size:
        raise DimensionMismatchError(f"Matrix of shape {A.shape} does not match vector of length {b.size}")
    if A.shape[0] > limit:
        raise SizeLimitError("direct_solve", A.shape[0], limit)
    try:
        x = splinalg.splu(sparse.csc_matrix(A, dtype=complex)).solve(b)
    except RuntimeError as e:
        logger.error(f"Direct solve failed: {str(e)}")
        raise SingularMatrixError(f"System matrix is singular: {e}") from e
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError("Direct solve produced non-finite values")
    return x


@register_solver
class DirectSolver(LinearSolver):
    """稀疏直接求解器"""

    @property
    def solver_name(self) -> SolverKind:
        return SolverKind.DIRECT

    def solve(self, system: GalerkinSystem, cfg: SolverConfig) -> SolveOutcome:
        start = perf_counter()
        A = system.full_matrix
        x = direct_solve(A, system.rhs_vector)
        report = SolveReport(
            solver=SolverKind.DIRECT,
            iterations=0,
            converged=True,
            status=SolveStatus.CONVERGED,
            nnz_operator=A.nnz,
            total_time=perf_counter() - start,
        )
        logger.info(f"Direct solve finished: n={A.shape[0]}")
        return SolveOutcome(solution=x, report=report, dims=system.op.dims)

from typing import List, Optional, Tuple

import numpy as np
from scipy import sparse

from . import register_solver
from .base import GalerkinSystem, LinearSolver, OperationTimer, SolveOutcome
from ...core.config import settings
from ...core.errors import DimensionMismatchError
from ...core.logging import iteration_logger, logger
from ...models.solver import SolveStatus, SolverKind, TimingCategory
from ...schemas.solver import SolveReport, SolverConfig
from ..galerkin_service import MeanPreconditioner, precond_apply_full


def p_bicg_full(
    A: sparse.spmatrix,
    M: MeanPreconditioner,
    b: np.ndarray,
    cfg: Optional[SolverConfig] = None,
) -> Tuple[np.ndarray, SolveReport]:
    """
    显式组装矩阵上的预条件 BiCG（复数形式）

    与低秩版本使用相同的预条件子、停止准则和中断判据。

    Args:
        A: 显式组装的系统矩阵
        M: 均值预条件子
        b: 右端向量
        cfg: 求解器配置

    Returns:
        Tuple[np.ndarray, SolveReport]: 解向量与报告
    """
    cfg = cfg or SolverConfig()
    timer = OperationTimer(cfg.record_timings)
    b = np.asarray(b, dtype=complex)
    if A.shape[0] != A.shape[1] or A.shape[1] != b.size:
        raise DimensionMismatchError(f"Matrix of shape {A.shape} does not match vector of length {b.size}")
    A = sparse.csr_matrix(A, dtype=complex)
    AH = A.conj().T.tocsr()

    def inner(x: np.ndarray, y: np.ndarray) -> complex:
        # y^H x
        with timer.measure(TimingCategory.TRACE):
            return complex(np.vdot(y, x))

    def norm(x: np.ndarray) -> float:
        with timer.measure(TimingCategory.TRACE):
            return float(np.linalg.norm(x))

    x = np.zeros_like(b)
    r = b.copy()
    r_shadow = b.copy()
    norm_b = norm(b)
    residuals: List[float] = [norm_b]
    status = SolveStatus.MAX_ITERATIONS
    threshold = cfg.tol * norm_b
    p = p_shadow = None
    rho_prev = 0j
    k = 0

    logger.info(f"Starting full-rank BiCG: n={b.size}, nnz(A)={A.nnz}, tol={cfg.tol:g}")
    while True:
        if residuals[-1] <= threshold:
            status = SolveStatus.CONVERGED
            break
        if k >= cfg.max_it:
            break

        with timer.measure(TimingCategory.PRECONDITIONER):
            z = precond_apply_full(M, r)
            z_shadow = precond_apply_full(M, r_shadow, adjoint=True)

        rho = inner(z, r_shadow)
        if abs(rho) <= settings.BREAKDOWN_TOL * norm(r_shadow) * norm(z):
            logger.warning(f"Full-rank BiCG breakdown at iteration {k}: rho={abs(rho):.3e}")
            status = SolveStatus.BREAKDOWN
            break

        if k == 0:
            p, p_shadow = z, z_shadow
        else:
            beta = rho / rho_prev
            p = z + beta * p
            p_shadow = z_shadow + np.conj(beta) * p_shadow

        with timer.measure(TimingCategory.MATVEC):
            q = A @ p
            q_shadow = AH @ p_shadow

        sigma = inner(q, p_shadow)
        if abs(sigma) <= settings.BREAKDOWN_TOL * norm(p_shadow) * norm(q):
            logger.warning(f"Full-rank BiCG breakdown at iteration {k}: <p~,Ap>={abs(sigma):.3e}")
            status = SolveStatus.BREAKDOWN
            break
        alpha = rho / sigma

        x = x + alpha * p
        r = r - alpha * q
        r_shadow = r_shadow - np.conj(alpha) * q_shadow
        rho_prev = rho
        k += 1
        residuals.append(norm(r))
        iteration_logger.debug(f"iteration {k}: ||r||={residuals[-1]:.6e}")

    total = timer.total
    report = SolveReport(
        solver=SolverKind.FULL,
        iterations=k,
        converged=status is SolveStatus.CONVERGED,
        status=status,
        residual_history=residuals,
        time_shares=timer.shares(total),
        nnz_operator=A.nnz,
        nnz_preconditioner=M.nnz,
        storage=M.storage,
        total_time=total,
    )
    logger.info(f"Full-rank BiCG finished: status={status.value}, iterations={k}")
    return x, report


@register_solver
class FullBiCGSolver(LinearSolver):
    """显式组装矩阵上的预条件 BiCG 基准求解器"""

    @property
    def solver_name(self) -> SolverKind:
        return SolverKind.FULL

    def solve(self, system: GalerkinSystem, cfg: SolverConfig) -> SolveOutcome:
        x, report = p_bicg_full(system.full_matrix, system.M, system.rhs_vector, cfg)
        return SolveOutcome(solution=x, report=report, dims=system.op.dims)

"""
预条件低秩 BiCG

所有 Krylov 向量以低秩因子保存，每次秩增长的运算之后做截断。
"""

from typing import List, Optional, Tuple

import numpy as np

from . import register_solver
from .base import GalerkinSystem, LinearSolver, OperationTimer, SolveOutcome
from ...core.config import settings
from ...core.errors import DimensionMismatchError
from ...core.logging import iteration_logger, logger
from ...models.solver import SolveStatus, SolverKind, TimingCategory
from ...schemas.solver import SolveReport, SolverConfig
from ...utils.lowrank_utils import (
    LowRankFactor,
    lr_add,
    lr_frob_norm,
    lr_inner,
    lr_scale,
    lr_truncate,
)
from ..galerkin_service import (
    KronOperator,
    MeanPreconditioner,
    apply_AH_lowrank,
    apply_A_lowrank,
    build_full_A,
    precond_apply,
)


def plr_bicg(
    op: KronOperator,
    M: MeanPreconditioner,
    B: LowRankFactor,
    cfg: Optional[SolverConfig] = None,
) -> Tuple[LowRankFactor, SolveReport]:
    """
    预条件低秩 BiCG，X_0 = 0

    停止准则 ||R_k||_F <= tol ||B||_F 在每步开始时检查；
    rho 或 <P~, Q> 相对为零时视为中断并返回当前迭代。

    Args:
        op: Kronecker 算子
        M: 均值预条件子
        B: 低秩右端项
        cfg: 求解器配置

    Returns:
        Tuple[LowRankFactor, SolveReport]: 最后一次迭代的解与报告
    """
    cfg = cfg or SolverConfig()
    timer = OperationTimer(cfg.record_timings)
    eps = cfg.eps_rel

    def truncate(X: LowRankFactor) -> LowRankFactor:
        with timer.measure(TimingCategory.TRUNCATION):
            return lr_truncate(X, eps)

    def inner(X: LowRankFactor, Y: LowRankFactor) -> complex:
        with timer.measure(TimingCategory.TRACE):
            return lr_inner(X, Y)

    def norm(X: LowRankFactor) -> float:
        with timer.measure(TimingCategory.TRACE):
            return lr_frob_norm(X)

    J, Q_s = op.dims
    if B.shape != op.dims:
        raise DimensionMismatchError(f"Right-hand side dims {B.shape} do not match operator dims {op.dims}")

    A_full = build_full_A(op) if cfg.audit_true_residual else None
    b_vec = B.to_vector() if A_full is not None else None

    X = LowRankFactor.zeros(J, Q_s)
    R = B
    R_shadow = B
    norm_B = norm(B)
    residuals: List[float] = [norm_B]
    true_residuals: List[float] = []
    ranks: List[int] = []
    status = SolveStatus.MAX_ITERATIONS
    threshold = cfg.tol * norm_B
    P = P_shadow = None
    rho_prev = 0j
    k = 0

    logger.info(f"Starting low-rank BiCG: J={J}, Q_s={Q_s}, N={op.N}, tol={cfg.tol:g}, eps_rel={eps:g}")
    while True:
        if residuals[-1] <= threshold:
            status = SolveStatus.CONVERGED
            break
        if k >= cfg.max_it:
            break

        with timer.measure(TimingCategory.PRECONDITIONER):
            Z = precond_apply(M, R)
            Z_shadow = precond_apply(M, R_shadow, adjoint=True)

        rho = inner(Z, R_shadow)
        if abs(rho) <= settings.BREAKDOWN_TOL * norm(R_shadow) * norm(Z):
            logger.warning(f"Low-rank BiCG breakdown at iteration {k}: rho={abs(rho):.3e}")
            status = SolveStatus.BREAKDOWN
            break

        if k == 0:
            P, P_shadow = Z, Z_shadow
        else:
            beta = rho / rho_prev
            P = truncate(lr_add(Z, lr_scale(P, beta)))
            P_shadow = truncate(lr_add(Z_shadow, lr_scale(P_shadow, np.conj(beta))))

        with timer.measure(TimingCategory.MATVEC):
            Q = apply_A_lowrank(op, P, cfg.matvec_mode)
            Q_shadow = apply_AH_lowrank(op, P_shadow, cfg.matvec_mode)

        sigma = inner(Q, P_shadow)
        if abs(sigma) <= settings.BREAKDOWN_TOL * norm(P_shadow) * norm(Q):
            logger.warning(f"Low-rank BiCG breakdown at iteration {k}: <P~,AP>={abs(sigma):.3e}")
            status = SolveStatus.BREAKDOWN
            break
        alpha = rho / sigma

        X = truncate(lr_add(X, lr_scale(P, alpha)))
        R = truncate(lr_add(R, lr_scale(Q, -alpha)))
        R_shadow = truncate(lr_add(R_shadow, lr_scale(Q_shadow, -np.conj(alpha))))
        rho_prev = rho
        k += 1

        residuals.append(norm(R))
        ranks.append(X.rank)
        if A_full is not None:
            true_residuals.append(float(np.linalg.norm(b_vec - A_full @ X.to_vector())))
        iteration_logger.debug(f"iteration {k}: ||R||={residuals[-1]:.6e}, rank(X)={X.rank}, rank(R)={R.rank}")

    total = timer.total
    relative = residuals[-1] / norm_B if norm_B else 0.0
    report = SolveReport(
        solver=SolverKind.LOWRANK,
        iterations=k,
        converged=status is SolveStatus.CONVERGED,
        status=status,
        residual_history=residuals,
        true_residual_history=true_residuals,
        rank_history=ranks,
        avg_rank=float(np.mean(ranks)) if ranks else 0.0,
        time_shares=timer.shares(total),
        nnz_preconditioner=M.nnz,
        storage=M.storage,
        total_time=total,
    )
    logger.info(
        f"Low-rank BiCG finished: status={status.value}, iterations={k}, "
        f"relative residual={relative:.3e}, avg rank={report.avg_rank:.2f}"
    )
    return X, report


@register_solver
class LowRankBiCGSolver(LinearSolver):
    """预条件低秩 BiCG 求解器"""

    @property
    def solver_name(self) -> SolverKind:
        return SolverKind.LOWRANK

    def solve(self, system: GalerkinSystem, cfg: SolverConfig) -> SolveOutcome:
        X, report = plr_bicg(system.op, system.M, system.B, cfg)
        report = report.model_copy(update={"nnz_operator": system.nnz_operator})
        return SolveOutcome(solution=X, report=report, dims=system.op.dims)

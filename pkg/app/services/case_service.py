from contextlib import contextmanager
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from ..core.config import settings
from ..core.errors import CaseExecutionError, ConfigurationError
from ..core.logging import logger
from ..models.solver import SolverKind
from ..schemas.case import CaseReport, ProblemConfig
from ..utils.chaos_utils import MultiIndexSet, StochasticMatrices, assemble_G, build_multi_index_set
from ..utils.fem_utils import HelmholtzMatrices, RhsData, TriMesh, assemble_helmholtz, assemble_rhs, build_mesh
from ..utils.field_utils import KLExpansion, kle_eigenpairs, positivity_check
from ..utils.lowrank_utils import LowRankFactor
from .galerkin_service import KronOperator, assemble_rhs_lowrank, precond_prepare
from .solvers import get_solver
from .solvers.base import GalerkinSystem, SolveOutcome

# 正定性检查的网格分辨率
POSITIVITY_GRID = 101


@dataclass(frozen=True)
class AssembledCase:
    """组装完成的算例数据"""

    config: ProblemConfig
    kle: KLExpansion
    mis: MultiIndexSet
    stochastic: StochasticMatrices
    mesh: TriMesh
    matrices: HelmholtzMatrices
    rhs: RhsData
    op: KronOperator
    B: LowRankFactor
    positivity_bound: float


@contextmanager
def _stage(label: str, stage: str):
    """把阶段内的异常包装为 CaseExecutionError"""
    try:
        yield
    except (ConfigurationError, CaseExecutionError):
        raise
    except Exception as e:
        logger.error(f"Case {label} failed during {stage}: {str(e)}")
        raise CaseExecutionError(label, stage, e) from e


def assemble_case(cfg: ProblemConfig) -> AssembledCase:
    """
    组装 KL展开 -> 混沌基 -> 有限元 -> 算子 -> 右端项

    Args:
        cfg: 算例配置

    Returns:
        AssembledCase: 组装结果
    """
    label = cfg.label
    with _stage(label, "random-field"):
        kle = kle_eigenpairs(cfg.N, cfg.length, cfg.sigma, cfg.mean)
        beta1, ok = positivity_check(kle, POSITIVITY_GRID)
        if not ok:
            logger.warning(f"Case {label}: coefficient is not uniformly positive (bound {beta1:.3e})")
    with _stage(label, "chaos-basis"):
        mis = build_multi_index_set(cfg.N, cfg.Q)
        stochastic = assemble_G(mis)
    mesh = build_mesh(cfg.Np, cfg.dirichlet_edges)
    with _stage(label, "helmholtz-fem"):
        matrices = assemble_helmholtz(mesh, kle, cfg.wavenumber, rule=cfg.quadrature)
        rhs = assemble_rhs(mesh, matrices, cfg.source, cfg.dirichlet_value, rule=cfg.quadrature)
    with _stage(label, "galerkin-operator"):
        op = KronOperator.from_matrices(stochastic, matrices)
        B = assemble_rhs_lowrank(rhs, mis.size)
    logger.info(f"Assembled case {label}: J={op.J}, Q_s={op.Q_s}, size(A)={op.size}")
    return AssembledCase(
        config=cfg,
        kle=kle,
        mis=mis,
        stochastic=stochastic,
        mesh=mesh,
        matrices=matrices,
        rhs=rhs,
        op=op,
        B=B,
        positivity_bound=beta1,
    )


def _discrepancy(outcomes: Dict[SolverKind, SolveOutcome]) -> Optional[float]:
    """各解相对参考解（直接解优先，否则第一个求解器）的最大相对 Frobenius 差"""
    if len(outcomes) < 2:
        return None
    reference_kind = SolverKind.DIRECT if SolverKind.DIRECT in outcomes else next(iter(outcomes))
    reference = outcomes[reference_kind].dense()
    scale = np.linalg.norm(reference) or 1.0
    return max(
        float(np.linalg.norm(outcome.dense() - reference) / scale)
        for kind, outcome in outcomes.items()
        if kind is not reference_kind
    )


def run_case(cfg: ProblemConfig) -> CaseReport:
    """
    运行一个算例：组装并调用选定的求解器

    Args:
        cfg: 算例配置

    Returns:
        CaseReport: 算例报告

    Raises:
        ConfigurationError: 配置无效
        CaseExecutionError: 组装或求解失败
    """
    label = cfg.label
    case = assemble_case(cfg)
    solver_cfg = cfg.solver_config()
    with _stage(label, "preconditioner"):
        M = precond_prepare(case.matrices.K[0], solver_cfg.precond_storage, G0=case.stochastic.G[0])
    system = GalerkinSystem(case.op, M, case.B)

    outcomes: Dict[SolverKind, SolveOutcome] = {}
    for kind in cfg.solver.expand():
        with _stage(label, f"solve:{kind.value}"):
            outcomes[kind] = get_solver(kind).solve(system, solver_cfg)

    with _stage(label, "discrepancy"):
        discrepancy = _discrepancy(outcomes)

    report = CaseReport(
        config=cfg,
        J=case.op.J,
        Q_s=case.op.Q_s,
        size_A=case.op.size,
        positivity_bound=case.positivity_bound,
        reports=[outcome.report for outcome in outcomes.values()],
        discrepancy=discrepancy,
    )
    logger.info(f"Case {label} finished: converged={report.converged}, discrepancy={discrepancy}")
    return report


def run_bench(
    configs: Sequence[ProblemConfig],
    workers: Optional[int] = None,
    distributed: bool = False,
) -> List[CaseReport]:
    """
    批量运行独立算例，结果按输入顺序返回

    Args:
        configs: 算例配置列表
        workers: 本地进程池宽度，默认 settings.BENCH_WORKERS
        distributed: 为真时以 Celery 任务提交

    Returns:
        List[CaseReport]: 与输入顺序一致的报告
    """
    workers = settings.BENCH_WORKERS if workers is None else workers
    if workers < 1:
        raise ConfigurationError(f"workers must be at least 1, got {workers}")
    logger.info(f"Running bench with {len(configs)} cases (workers={workers}, distributed={distributed})")

    if distributed:
        from ..worker.tasks import run_case_task

        results = [run_case_task.delay(cfg.model_dump(mode="json")) for cfg in configs]
        return [CaseReport.model_validate(r.get(timeout=settings.TASK_TIME_LIMIT)) for r in results]

    return Parallel(n_jobs=workers)(delayed(run_case)(cfg) for cfg in configs)

from typing import Dict, Type, Union
from .base import LinearSolver
from ...core.logging import logger
from ...models.solver import SolverKind

# 求解器注册表
_solvers: Dict[SolverKind, Type[LinearSolver]] = {}


def register_solver(solver_class: Type[LinearSolver]) -> Type[LinearSolver]:
    """
    注册求解器

    Args:
        solver_class: 求解器类

    Returns:
        Type[LinearSolver]: 求解器类
    """
    solver_instance = solver_class()
    _solvers[solver_instance.solver_name] = solver_class
    return solver_class


def get_solver(solver_name: Union[SolverKind, str] = SolverKind.LOWRANK) -> LinearSolver:
    """
    获取求解器实例

    Args:
        solver_name: 求解器名称

    Returns:
        LinearSolver: 求解器实例

    Raises:
        ValueError: 求解器不存在
    """
    try:
        kind = SolverKind(solver_name)
    except ValueError:
        kind = None

    solver_class = _solvers.get(kind)

    if solver_class is None:
        available_solvers = ", ".join(k.value for k in _solvers)
        logger.error(f"Solver '{solver_name}' not found. Available solvers: {available_solvers}")
        raise ValueError(f"Solver '{solver_name}' not found")

    return solver_class()


def get_all_solvers() -> Dict[SolverKind, LinearSolver]:
    """
    获取所有求解器实例

    Returns:
        Dict[SolverKind, LinearSolver]: 求解器实例字典
    """
    return {name: solver_class() for name, solver_class in _solvers.items()}

# 导入所有求解器模块以触发注册
from . import lowrank_bicg  # 预条件低秩 BiCG
from . import full_bicg  # 全秩 BiCG 基准
from . import direct_solver  # 稀疏直接求解
from .lowrank_bicg import plr_bicg
from .full_bicg import p_bicg_full
from .direct_solver import direct_solve

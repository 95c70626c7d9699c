import sys
from typing import Any, Callable, Dict, List, Optional, Sequence

import click

from . import __version__
from .core.config import settings
from .core.errors import ConfigurationError, SGFEMError
from .core.logging import logger
from .models.solver import MatvecMode, PrecondStorage, SolverSelection
from .schemas.case import ProblemConfig
from .services.case_service import assemble_case, run_bench, run_case
from .services.existence_service import run_existence_suite
from .utils.config_file import load_config_file, load_sweep_file
from .utils.fem_utils import TRIANGLE_RULES, spectrum_K0
from .utils.report_utils import ReportUtils, emit_report

# 命令行选项到 ProblemConfig 字段的映射
_PROBLEM_OPTIONS = [
    click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="key=value 配置文件"),
    click.option("--N", "N", type=int, default=None, help="KL展开截断长度"),
    click.option("--Q", "Q", type=int, default=None, help="混沌多项式最高总阶数"),
    click.option("--Np", "Np", type=int, default=None, help="每个方向的网格点数"),
    click.option("--c", "c", type=str, default=None, help="波数，可写作 1.5pi"),
    click.option("--c-pi/--no-c-pi", "c_pi", default=None, help="把 --c 解释为 pi 的倍数"),
    click.option("--mean", type=float, default=None, help="系数均值"),
    click.option("--sigma", type=float, default=None, help="系数标准差"),
    click.option("--length", type=float, default=None, help="相关长度"),
    click.option("--source", type=float, default=None, help="源项 f"),
    click.option("--dirichlet-value", type=float, default=None, help="Dirichlet 边界值 g"),
    click.option("--dirichlet-edges", type=str, default=None, help="逗号分隔的 Dirichlet 边"),
    click.option("--quadrature", type=click.Choice(sorted(TRIANGLE_RULES)), default=None),
    click.option("--tol", type=float, default=None, help="停止阈值"),
    click.option("--eps-rel", type=float, default=None, help="截断精度"),
    click.option("--max-it", type=int, default=None, help="最大迭代次数"),
    click.option("--solver", type=click.Choice([s.value for s in SolverSelection]), default=None),
    click.option("--matvec-mode", type=click.Choice([m.value for m in MatvecMode]), default=None),
    click.option("--precond-storage", type=click.Choice([p.value for p in PrecondStorage]), default=None),
    click.option("--seed", type=int, default=None),
    click.option("--output", type=click.Path(dir_okay=False), default=None, help="输出CSV路径"),
]


def problem_options(func: Callable) -> Callable:
    """为命令添加算例配置选项"""
    for option in reversed(_PROBLEM_OPTIONS):
        func = option(func)
    return func


def build_config(config_path: Optional[str], overrides: Optional[Dict[str, Any]] = None, **flags: Any) -> ProblemConfig:
    """配置文件 < 扫描行 < 命令行参数"""
    options: Dict[str, Any] = dict(load_config_file(config_path))
    options.update(overrides or {})
    options.update({key: value for key, value in flags.items() if value is not None})
    return ProblemConfig.from_options(**options)


@click.group()
@click.version_option(__version__, prog_name="sgfem")
def main():
    """随机 Helmholtz 方程的随机Galerkin有限元与低秩 BiCG 求解"""


@main.command()
@problem_options
@click.option("--pretty", is_flag=True, help="输出可读表格")
def solve(config_path, pretty, **flags):
    """运行单个算例"""
    cfg = build_config(config_path, **flags)
    report = run_case(cfg)
    emit_report([report], cfg.output)
    if pretty:
        click.echo(ReportUtils.render_tables([report]))
    return 0 if report.converged else 1


@main.command()
@problem_options
@click.option("--sweep", "sweep_path", type=click.Path(dir_okay=False), required=True, help="扫描文件")
@click.option("--workers", type=int, default=None, help="本地进程池宽度")
@click.option("--distributed", is_flag=True, help="以 Celery 任务运行")
@click.option("--pretty", is_flag=True, help="输出可读表格")
def bench(config_path, sweep_path, workers, distributed, pretty, **flags):
    """按扫描文件批量运行算例"""
    configs: List[ProblemConfig] = []
    for overrides in load_sweep_file(sweep_path):
        base = {key: value for key, value in flags.items() if key != "output"}
        configs.append(build_config(config_path, overrides=overrides, **base))
    reports = run_bench(configs, workers=workers, distributed=distributed)
    emit_report(reports, flags.get("output"))
    if pretty:
        click.echo(ReportUtils.render_tables(reports))
    return 0 if all(report.converged for report in reports) else 1


@main.command()
@problem_options
def spectrum(config_path, **flags):
    """输出 K_0 的全部特征值"""
    cfg = build_config(config_path, **flags)
    case = assemble_case(cfg)
    eigenvalues = spectrum_K0(case.matrices.K[0])
    path = ReportUtils.write_spectrum(eigenvalues, cfg.output or settings.DEFAULT_SPECTRUM_PATH)
    click.echo(f"{eigenvalues.size} eigenvalues, min Im = {eigenvalues.imag.min():.3e} -> {path}")
    return 0


@main.command("verify-existence")
@click.option("--k", "k_list", type=int, multiple=True, help="求积参数，可重复")
@click.option("--seed", type=int, default=0)
@click.option("--output", type=click.Path(dir_okay=False), default=None, help="误差衰减CSV路径")
def verify_existence(k_list, seed, output):
    """运行低秩存在性数值实验"""
    k_list = tuple(k_list) or (4, 9, 16, 25, 36)
    result = run_existence_suite(k_list=k_list, seed=seed)
    path = ReportUtils.write_decay(result.decay_rows(), output or settings.DEFAULT_DECAY_PATH)
    click.echo(f"sinc slope = {result.sinc_slope:.4f} (rotation {result.sinc_rotation})")
    click.echo(f"SMW max residual = {result.smw_max_residual:.3e} over {result.smw_cases} cases")
    click.echo(f"splitting reconstruction error = {result.reconstruction_error:.3e}, G ranks = {result.g_ranks}")
    click.echo(f"exact-solve SMW error = {result.exact_smw_error:.3e}")
    for point in result.splitting_decay:
        click.echo(f"  k={point.k:>3}  error={point.error:.3e}")
    click.echo(f"decay table -> {path}")
    return 0


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    """
    命令行入口

    Args:
        argv: 参数列表，默认 sys.argv[1:]

    Returns:
        int: 0 成功，1 未收敛或运行失败，2 配置错误
    """
    try:
        code = main.main(args=list(argv) if argv is not None else None, prog_name="sgfem", standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return 2
    except ConfigurationError as e:
        logger.error(f"Configuration error: {str(e)}")
        click.echo(f"Error: {e}", err=True)
        return 2
    except SGFEMError as e:
        logger.error(f"Run failed: {str(e)}")
        click.echo(f"Error: {e}", err=True)
        return 1
    except click.Abort:
        return 1
    return code if isinstance(code, int) else 0


if __name__ == "__main__":
    sys.exit(cli_main())

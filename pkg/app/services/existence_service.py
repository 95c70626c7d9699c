"""
低秩解存在性的数值验证

- sinc 求积：1/x = int_0^inf exp(-t x) dt 经代换 t = asinh(e^u) 后用梯形公式离散，
  A^{-1} b 约等于 sum_j (2 w_j / mu) exp(-2 t_j A / mu) b，对 Kronecker 和逐因子求指数
- Sherman-Morrison-Woodbury 公式
- A = L + U V^T 分解（L = G_0 (x) K_0）以及用求积近似 L^{-1} 的误差序列
"""

from dataclasses import dataclass
from math import pi, sqrt
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as splinalg

from ..core.config import settings
from ..core.errors import (
    DimensionMismatchError,
    InadmissibleSpectrumError,
    SingularMatrixError,
    SizeLimitError,
)
from ..core.logging import logger
from ..schemas.case import DecayPoint, ExistenceReport, ProblemConfig
from ..utils.fem_utils import spectrum_K0
from ..utils.lowrank_utils import unvec, vec
from .case_service import assemble_case
from .galerkin_service import KronOperator, build_full_A
from .solvers import direct_solve


@dataclass(frozen=True)
class SincRule:
    """sinc 求积规则，j = -k..k"""

    k: int
    h_st: float
    nodes: np.ndarray    # t_j
    weights: np.ndarray  # w_j

    @property
    def j(self) -> np.ndarray:
        return np.arange(-self.k, self.k + 1)


@dataclass(frozen=True)
class StripSpectrumInfo:
    """
    Kronecker 和的谱所在带状区域

    rotation = 1 时谱在右半平面，mu 为实部界、lam 为虚部绝对值界；
    rotation = -1j 时谱在上半平面，mu 为虚部界、lam 为实部绝对值界。
    """

    mu_min: float
    mu_max: float
    lam: float
    rotation: complex


@dataclass(frozen=True)
class QuadratureResult:
    """求积近似的逆作用及所用的旋转"""

    x: np.ndarray
    rotation: complex
    mu_min: float


@dataclass(frozen=True)
class LowRankSplitting:
    """A = L + U V^T，L = G_0 (x) K_0，U = [U_i (x) K_i]，V = [V_i (x) I_J]"""

    L: KronOperator
    U: sparse.csr_matrix
    V: sparse.csr_matrix
    g_ranks: Tuple[int, ...]

    @property
    def update_rank(self) -> int:
        return self.U.shape[1]


def sinc_nodes_weights(k: int) -> SincRule:
    """
    sinc 求积节点与权重

    h = pi / sqrt(k), t_j = asinh(e^{j h}), w_j = h / sqrt(1 + e^{-2 j h})

    Args:
        k: 求积点数为 2k+1

    Returns:
        SincRule: 节点与权重均为正，节点随 j 递增
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    h = pi / sqrt(k)
    j = np.arange(-k, k + 1)
    nodes = np.arcsinh(np.exp(j * h))
    weights = h / np.sqrt(1.0 + np.exp(-2.0 * j * h))
    return SincRule(k=k, h_st=h, nodes=nodes, weights=weights)


def spectrum_strip(factors: Sequence[np.ndarray]) -> StripSpectrumInfo:
    """
    由各因子的特征值确定 Kronecker 和的谱区域与旋转

    Kronecker 和的特征值是各因子特征值之和，极值逐因子相加。

    Raises:
        InadmissibleSpectrumError: 谱既不在右半平面也不在上半平面
    """
    spectra = [linalg.eigvals(np.atleast_2d(a)) for a in factors]
    re_min = sum(float(s.real.min()) for s in spectra)
    if re_min > 0.0:
        return StripSpectrumInfo(
            mu_min=re_min,
            mu_max=sum(float(s.real.max()) for s in spectra),
            lam=sum(float(np.abs(s.imag).max()) for s in spectra),
            rotation=1.0 + 0j,
        )
    im_min = sum(float(s.imag.min()) for s in spectra)
    if im_min > 0.0:
        return StripSpectrumInfo(
            mu_min=im_min,
            mu_max=sum(float(s.imag.max()) for s in spectra),
            lam=sum(float(np.abs(s.real).max()) for s in spectra),
            rotation=-1j,
        )
    raise InadmissibleSpectrumError(
        f"Spectrum is in neither half plane: min Re sum={re_min:.3e}, min Im sum={im_min:.3e}"
    )


def _scaled_exponentials(
    factor: np.ndarray, rule: SincRule, mu_min: float, rotation: complex
) -> List[np.ndarray]:
    """exp(-2 t_j (rotation * A_i) / mu_min)，j = -k..k"""
    rotated = rotation * np.asarray(factor, dtype=complex)
    exps = []
    for t in rule.nodes:
        E = linalg.expm(-2.0 * t / mu_min * rotated)
        if not np.all(np.isfinite(E)):
            raise InadmissibleSpectrumError(f"Non-finite matrix exponential at node t={t:.3e}")
        exps.append(E)
    return exps


def _resolve_strip(factors: Sequence[np.ndarray], mu_min: Optional[float]) -> StripSpectrumInfo:
    strip = spectrum_strip(factors)
    if mu_min is None:
        return strip
    if mu_min <= 0.0:
        raise InadmissibleSpectrumError(f"mu_min must be positive, got {mu_min}")
    return StripSpectrumInfo(mu_min=mu_min, mu_max=strip.mu_max, lam=strip.lam, rotation=strip.rotation)


def quadrature_inverse_action(
    factors: Sequence[np.ndarray],
    b_factors: Sequence[np.ndarray],
    rule: SincRule,
    mu_min: Optional[float] = None,
) -> QuadratureResult:
    """
    用 sinc 求积近似 Kronecker 和 A = sum_i I (x) .. (x) A_i (x) .. (x) I 对秩1向量的逆作用

    Args:
        factors: d 个方阵 A_1..A_d
        b_factors: d 个向量，b = b_1 (x) .. (x) b_d
        rule: sinc 求积规则
        mu_min: 谱界；默认由因子特征值计算

    Returns:
        QuadratureResult: 近似解、所用旋转与谱界
    """
    if len(factors) != len(b_factors) or not factors:
        raise DimensionMismatchError("Need one right-hand side factor per matrix factor")
    for a, b in zip(factors, b_factors):
        a = np.atleast_2d(a)
        if a.shape[0] != a.shape[1] or a.shape[0] != np.size(b):
            raise DimensionMismatchError(f"Factor of shape {a.shape} does not match vector of length {np.size(b)}")

    strip = _resolve_strip(factors, mu_min)
    size = int(np.prod([np.size(b) for b in b_factors]))
    b_full = b_factors[0]
    for b in b_factors[1:]:
        b_full = np.kron(b_full, b)
    if not np.any(b_full):
        return QuadratureResult(x=np.zeros(size, dtype=complex), rotation=strip.rotation, mu_min=strip.mu_min)

    exps = [_scaled_exponentials(np.atleast_2d(a), rule, strip.mu_min, strip.rotation) for a in factors]
    x = np.zeros(size, dtype=complex)
    for j, w in enumerate(rule.weights):
        term = exps[0][j] @ np.asarray(b_factors[0], dtype=complex)
        for i in range(1, len(factors)):
            term = np.kron(term, exps[i][j] @ np.asarray(b_factors[i], dtype=complex))
        x += (2.0 * w / strip.mu_min) * term
    # A^{-1} = rotation (rotation A)^{-1}
    return QuadratureResult(x=strip.rotation * x, rotation=strip.rotation, mu_min=strip.mu_min)


def kron_sum_inverse_operator(
    A1: np.ndarray, A2: np.ndarray, rule: SincRule, mu_min: Optional[float] = None
) -> Callable[[np.ndarray], np.ndarray]:
    """
    两因子 Kronecker 和 A1 (x) I + I (x) A2 的近似逆，作用于一般向量

    (A1 (x) I + I (x) A2) vec(X) = vec(A2 X + X A1^T)，
    exp(-beta (A1 (x) I + I (x) A2)) vec(X) = vec(exp(-beta A2) X exp(-beta A1)^T)。

    Returns:
        Callable: y -> 近似的 A^{-1} y
    """
    strip = _resolve_strip([A1, A2], mu_min)
    E1 = _scaled_exponentials(A1, rule, strip.mu_min, strip.rotation)
    E2 = _scaled_exponentials(A2, rule, strip.mu_min, strip.rotation)
    coefficients = 2.0 * rule.weights / strip.mu_min
    rows, cols = A2.shape[0], A1.shape[0]

    def apply(y: np.ndarray) -> np.ndarray:
        Y = unvec(np.asarray(y, dtype=complex), rows, cols)
        X = sum(c * (e2 @ Y @ e1.T) for c, e1, e2 in zip(coefficients, E1, E2))
        return strip.rotation * vec(X)

    return apply


def smw_solve(
    L_solver: Callable[[np.ndarray], np.ndarray],
    U: np.ndarray,
    V: np.ndarray,
    b: np.ndarray,
    cond_limit: Optional[float] = None,
) -> np.ndarray:
    """
    Sherman-Morrison-Woodbury：(L + U V^T)^{-1} b

    只需对 L 求解以及一个 m x m 的核心矩阵 C = I + V^T L^{-1} U。

    Args:
        L_solver: y -> L^{-1} y
        U: n x m
        V: n x m
        b: 右端向量

    Returns:
        np.ndarray: 解向量

    Raises:
        SingularMatrixError: 核心矩阵奇异
    """
    cond_limit = settings.PRECOND_COND_LIMIT if cond_limit is None else cond_limit
    U = U.toarray() if sparse.issparse(U) else np.asarray(U)
    V = V.toarray() if sparse.issparse(V) else np.asarray(V)
    if U.shape != V.shape or U.ndim != 2 or U.shape[0] != np.size(b):
        raise DimensionMismatchError(f"Incompatible update factors {U.shape}, {V.shape} for length {np.size(b)}")

    y0 = np.asarray(L_solver(np.asarray(b, dtype=complex)), dtype=complex)
    m = U.shape[1]
    if m == 0:
        return y0
    Z = np.column_stack([L_solver(U[:, j].astype(complex)) for j in range(m)])
    core = np.eye(m, dtype=complex) + V.T @ Z
    condition = float(np.linalg.cond(core))
    if not np.isfinite(condition) or condition > cond_limit:
        logger.error(f"SMW core matrix is singular (condition {condition:.3e})")
        raise SingularMatrixError("SMW core matrix I + V^T L^{-1} U is singular", condition_estimate=condition)
    return y0 - Z @ linalg.solve(core, V.T @ y0)


def _low_rank_factors(G: np.ndarray, zero_tol: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """G = U V^T，秩按数值零阈值截取"""
    W, s, Zh = linalg.svd(G)
    if zero_tol is None:
        zero_tol = max(G.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    r = int(np.sum(s > zero_tol))
    return W[:, :r] * s[:r], Zh[:r].T


def splitting_decompose(op: KronOperator) -> LowRankSplitting:
    """
    分解 A = G_0 (x) K_0 + sum_{i>=1} (U_i V_i^T) (x) K_i = L + U V^T

    Args:
        op: Kronecker 算子

    Returns:
        LowRankSplitting: L 与稀疏低秩修正因子
    """
    J = op.J
    identity = sparse.identity(J, dtype=complex, format="csr")
    U_blocks, V_blocks, ranks = [], [], []
    for G_i, K_i in zip(op.G[1:], op.K[1:]):
        U_i, V_i = _low_rank_factors(G_i.toarray())
        ranks.append(U_i.shape[1])
        if U_i.shape[1] == 0:
            continue
        U_blocks.append(sparse.kron(sparse.csr_matrix(U_i), K_i, format="csr"))
        V_blocks.append(sparse.kron(sparse.csr_matrix(V_i), identity, format="csr"))
    if U_blocks:
        U = sparse.hstack(U_blocks, format="csr")
        V = sparse.hstack(V_blocks, format="csr")
    else:
        U = sparse.csr_matrix((op.size, 0), dtype=complex)
        V = sparse.csr_matrix((op.size, 0), dtype=complex)
    L = KronOperator(G=(op.G[0],), K=(op.K[0],))
    logger.info(f"Decomposed operator: update rank {U.shape[1]}, G_i ranks {ranks}")
    return LowRankSplitting(L=L, U=U, V=V, g_ranks=tuple(ranks))


def _check_existence_size(op: KronOperator, limit: Optional[int]):
    limit = settings.EXISTENCE_LIMIT if limit is None else limit
    if op.size > limit:
        raise SizeLimitError("splitting_approx_error", op.size, limit)


def _relative_error(x: np.ndarray, reference: np.ndarray) -> float:
    return float(np.linalg.norm(x - reference) / np.linalg.norm(reference))


def smw_exact_error(op: KronOperator, b: np.ndarray, limit: Optional[int] = None) -> float:
    """L 精确求解时 SMW 解相对直接解的误差"""
    _check_existence_size(op, limit)
    decomposition = splitting_decompose(op)
    lu = splinalg.splu(build_full_A(decomposition.L).tocsc())
    x = smw_solve(lu.solve, decomposition.U, decomposition.V, b)
    return _relative_error(x, direct_solve(build_full_A(op), b))


def splitting_approx_error(
    op: KronOperator,
    b: np.ndarray,
    k_list: Sequence[int],
    limit: Optional[int] = None,
) -> List[Tuple[int, float]]:
    """
    用 sinc 求积近似 L^{-1}，经 SMW 组合得到近似解，返回相对误差序列

    L = I (x) K_0 视为 Kronecker 和（G 方向的因子为零矩阵）。

    Args:
        op: Kronecker 算子，要求 G_0 = I
        b: 右端向量
        k_list: 求积参数序列
        limit: 规模上限，默认 settings.EXISTENCE_LIMIT

    Returns:
        List[Tuple[int, float]]: (k, 相对误差)

    Raises:
        InadmissibleSpectrumError: K_0 的谱不满足条件
    """
    _check_existence_size(op, limit)
    G0 = op.G[0]
    if (G0 - sparse.identity(op.Q_s)).count_nonzero():
        raise DimensionMismatchError("Quadrature path requires G_0 = I")

    K0 = op.K[0].toarray()
    eigenvalues = spectrum_K0(op.K[0])
    if not (eigenvalues.real.min() > 0.0 or eigenvalues.imag.min() > 0.0):
        raise InadmissibleSpectrumError("Spectrum of K_0 is outside both admissible half planes")

    decomposition = splitting_decompose(op)
    reference = direct_solve(build_full_A(op), b)
    zero = np.zeros((op.Q_s, op.Q_s), dtype=complex)
    errors = []
    for k in k_list:
        L_solver = kron_sum_inverse_operator(zero, K0, sinc_nodes_weights(k))
        x = smw_solve(L_solver, decomposition.U, decomposition.V, b)
        errors.append((int(k), _relative_error(x, reference)))
        logger.info(f"Quadrature SMW error at k={k}: {errors[-1][1]:.3e}")
    return errors


def laplacian_1d(n: int, shift: float = 0.0) -> np.ndarray:
    """一维 Dirichlet 差分 Laplace 矩阵 tridiag(-1, 2, -1) + shift I"""
    main = np.full(n, 2.0 + shift)
    off = np.full(n - 1, -1.0)
    return np.diag(main) + np.diag(off, 1) + np.diag(off, -1)


def fit_decay_slope(ks: Sequence[int], errors: Sequence[float]) -> float:
    """log(error) 对 sqrt(k) 的最小二乘斜率"""
    return float(np.polyfit(np.sqrt(np.asarray(ks, dtype=float)), np.log(np.asarray(errors)), 1)[0])


def sinc_decay_table(
    factors: Sequence[np.ndarray],
    b_factors: Sequence[np.ndarray],
    k_list: Sequence[int],
) -> List[Tuple[int, float]]:
    """求积逆作用相对 Kronecker 和稠密求解的误差序列"""
    A = sum(
        np.kron(np.kron(np.eye(int(np.prod([f.shape[0] for f in factors[:i]]))), f),
                np.eye(int(np.prod([f.shape[0] for f in factors[i + 1:]]))))
        for i, f in enumerate(factors)
    )
    b = b_factors[0]
    for v in b_factors[1:]:
        b = np.kron(b, v)
    reference = linalg.solve(A, b)
    table = []
    for k in k_list:
        x = quadrature_inverse_action(factors, b_factors, sinc_nodes_weights(k)).x
        table.append((int(k), _relative_error(x, reference)))
    return table


def _random_smw_residual(rng: np.random.Generator) -> float:
    """随机良态 L 与低秩修正上的 SMW 相对残差"""
    n = int(rng.integers(5, 80))
    m = int(rng.integers(1, 8))
    L = n * np.eye(n) + rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    U = rng.standard_normal((n, m)) / np.sqrt(n)
    V = rng.standard_normal((n, m)) / np.sqrt(n)
    b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x = smw_solve(lambda y: linalg.solve(L, y), U, V, b)
    return float(np.linalg.norm((L + U @ V.T) @ x - b) / np.linalg.norm(b))


def run_existence_suite(
    k_list: Sequence[int] = (4, 9, 16, 25, 36),
    problem: Optional[ProblemConfig] = None,
    factor_dim: int = 16,
    shift: float = 1.0,
    smw_cases: int = 20,
    seed: int = 0,
) -> ExistenceReport:
    """
    汇总存在性实验：sinc 误差衰减、随机 SMW、分解重构与求积近似解的误差

    Args:
        k_list: 求积参数序列
        problem: 分解实验使用的小算例，默认 P(2,2,6,0)
        factor_dim: sinc 测试问题中每个因子的维数
        shift: 一维 Laplace 因子的平移
        smw_cases: 随机 SMW 算例个数
        seed: 随机种子

    Returns:
        ExistenceReport: 实验报告
    """
    rng = np.random.default_rng(seed)
    factors = [laplacian_1d(factor_dim, shift), laplacian_1d(factor_dim, shift)]
    b_factors = [np.ones(factor_dim), np.linspace(1.0, 2.0, factor_dim)]
    rotation = spectrum_strip(factors).rotation
    sinc_table = sinc_decay_table(factors, b_factors, k_list)
    sinc_slope = fit_decay_slope(*zip(*sinc_table))
    logger.info(f"Sinc decay slope {sinc_slope:.4f} over k={list(k_list)}")

    smw_residual = max((_random_smw_residual(rng) for _ in range(smw_cases)), default=0.0)

    problem = problem or ProblemConfig(N=2, Q=2, Np=6, c=0.0)
    case = assemble_case(problem)
    decomposition = splitting_decompose(case.op)
    reconstructed = build_full_A(decomposition.L) + decomposition.U @ decomposition.V.T
    difference = reconstructed - build_full_A(case.op)
    reconstruction_error = float(abs(difference).max()) if difference.nnz else 0.0

    b = case.B.to_vector()
    exact_error = smw_exact_error(case.op, b)
    splitting_table = splitting_approx_error(case.op, b, k_list)
    splitting_slope = fit_decay_slope(*zip(*splitting_table)) if len(splitting_table) >= 2 else None

    return ExistenceReport(
        sinc_decay=[DecayPoint(k=k, error=e) for k, e in sinc_table],
        sinc_slope=sinc_slope,
        sinc_rotation="none" if rotation == 1 else "-i",
        smw_cases=smw_cases,
        smw_max_residual=smw_residual,
        reconstruction_error=reconstruction_error,
        g_ranks=list(decomposition.g_ranks),
        update_rank=decomposition.update_rank,
        exact_smw_error=exact_error,
        splitting_decay=[DecayPoint(k=k, error=e) for k, e in splitting_table],
        splitting_slope=splitting_slope,
    )

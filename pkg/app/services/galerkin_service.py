"""
Galerkin 系统算子 A = sum_i G_i (x) K_i、右端项与均值预条件子 M_0 = G_0 (x) K_0

恒等式 (G (x) K) vec(X) = vec(K X G^T)：对 X = U V^T 有 K X G^T = (K U)(G V)^T。
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as splinalg

from ..core.config import settings
from ..core.errors import DimensionMismatchError, SingularMatrixError, SizeLimitError
from ..core.logging import logger
from ..models.solver import MatvecMode, PrecondStorage
from ..utils.chaos_utils import StochasticMatrices
from ..utils.fem_utils import HelmholtzMatrices, RhsData
from ..utils.lowrank_utils import LowRankFactor, unvec, vec


@dataclass(frozen=True, eq=False)
class KronOperator:
    """Kronecker 结构算子，仅保存因子对 (G_i, K_i)"""

    G: Tuple[sparse.csr_matrix, ...]
    K: Tuple[sparse.csr_matrix, ...]
    KH: Tuple[sparse.csr_matrix, ...] = field(init=False, repr=False)
    GH: Tuple[sparse.csr_matrix, ...] = field(init=False, repr=False)

    def __post_init__(self):
        G = tuple(sparse.csr_matrix(g) for g in self.G)
        K = tuple(sparse.csr_matrix(k, dtype=complex) for k in self.K)
        if not G or len(G) != len(K):
            raise DimensionMismatchError(
                f"Need matching non-empty factor lists, got {len(G)} G and {len(K)} K"
            )
        if any(g.shape != G[0].shape or g.shape[0] != g.shape[1] for g in G):
            raise DimensionMismatchError("All G_i must be square with the same dimension")
        if any(k.shape != K[0].shape or k.shape[0] != k.shape[1] for k in K):
            raise DimensionMismatchError("All K_i must be square with the same dimension")
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "KH", tuple(k.conj().T.tocsr() for k in K))
        object.__setattr__(self, "GH", tuple(g.conj().T.tocsr() for g in G))

    @classmethod
    def from_matrices(cls, stochastic: StochasticMatrices, matrices: HelmholtzMatrices) -> "KronOperator":
        """由随机矩阵与有限元矩阵构造算子"""
        return cls(G=stochastic.G, K=matrices.K)

    @property
    def N(self) -> int:
        return len(self.K) - 1

    @property
    def J(self) -> int:
        return self.K[0].shape[0]

    @property
    def Q_s(self) -> int:
        return self.G[0].shape[0]

    @property
    def dims(self) -> Tuple[int, int]:
        return self.J, self.Q_s

    @property
    def size(self) -> int:
        """系统维数 J * Q_s"""
        return self.J * self.Q_s


def _check_factor(op: KronOperator, X: LowRankFactor):
    if X.shape != op.dims:
        raise DimensionMismatchError(f"Factor dims {X.shape} do not match operator dims {op.dims}")


def _apply(
    K: Sequence[sparse.csr_matrix],
    G: Sequence[sparse.csr_matrix],
    X: LowRankFactor,
    mode: MatvecMode,
) -> LowRankFactor:
    if X.rank == 0:
        return X
    if mode is MatvecMode.DENSE:
        # U = sum_i K_i X G_i^T, V = I
        U = sum((k @ X.U) @ (g @ X.V).T for k, g in zip(K, G))
        return LowRankFactor(np.asarray(U), np.eye(X.shape[1], dtype=complex))
    U = np.hstack([k @ X.U for k in K])
    V = np.hstack([g @ X.V for g in G])
    return LowRankFactor(U, V)


def apply_A_lowrank(
    op: KronOperator,
    X: LowRankFactor,
    mode: MatvecMode = MatvecMode.FACTORED,
) -> LowRankFactor:
    """
    低秩形式的矩阵向量乘 A vec(X)

    Args:
        op: Kronecker 算子
        X: 低秩因子
        mode: factored 时返回秩 (N+1) r 的拼接因子；dense 时返回 (sum K_i X G_i^T, I)

    Returns:
        LowRankFactor: 未截断的结果
    """
    _check_factor(op, X)
    return _apply(op.K, op.G, X, MatvecMode(mode))


def apply_AH_lowrank(
    op: KronOperator,
    X: LowRankFactor,
    mode: MatvecMode = MatvecMode.FACTORED,
) -> LowRankFactor:
    """共轭转置算子 A^H = sum_i G_i^H (x) K_i^H 的低秩作用"""
    _check_factor(op, X)
    return _apply(op.KH, op.GH, X, MatvecMode(mode))


def build_full_A(op: KronOperator, limit: Optional[int] = None) -> sparse.csr_matrix:
    """
    显式组装稀疏矩阵 A（基准求解器与测试用）

    Args:
        op: Kronecker 算子
        limit: J*Q_s 上限，默认 settings.FULL_ASSEMBLY_LIMIT

    Returns:
        sparse.csr_matrix: 复稀疏矩阵
    """
    limit = settings.FULL_ASSEMBLY_LIMIT if limit is None else limit
    if op.size > limit:
        raise SizeLimitError("build_full_A", op.size, limit)
    A = sparse.csr_matrix((op.size, op.size), dtype=complex)
    for g, k in zip(op.G, op.K):
        A = A + sparse.kron(g, k, format="csr")
    return A.tocsr()


def operator_nnz(op: KronOperator, limit: Optional[int] = None) -> int:
    """
    A 的非零元个数

    规模允许时取组装结果的实际值，否则取结构上界 sum_i nnz(G_i) nnz(K_i)。
    """
    limit = settings.FULL_ASSEMBLY_LIMIT if limit is None else limit
    if op.size <= limit:
        return int(build_full_A(op, limit).nnz)
    return int(sum(g.nnz * k.nnz for g, k in zip(op.G, op.K)))


def assemble_rhs_lowrank(rhs: RhsData, basis_count: int) -> LowRankFactor:
    """
    秩1右端项 B = (f0 - lift) g_0^T，g_0 为第一个单位向量

    Args:
        rhs: 有限元右端数据
        basis_count: 混沌基函数个数 Q_s

    Returns:
        LowRankFactor: 秩为1，源项与边界值全为零时秩为0
    """
    spatial = np.asarray(rhs.rhs, dtype=complex)
    if not np.any(spatial):
        return LowRankFactor.zeros(spatial.size, basis_count)
    g0 = np.zeros((basis_count, 1), dtype=complex)
    g0[0, 0] = 1.0
    return LowRankFactor(spatial[:, None], g0)


@dataclass(frozen=True, eq=False)
class MeanPreconditioner:
    """均值预条件子 M_0 = G_0 (x) K_0 的求解算子"""

    J: int
    storage: PrecondStorage
    solve: Callable[[np.ndarray], np.ndarray]
    solve_adjoint: Callable[[np.ndarray], np.ndarray]
    nnz: int
    condition_estimate: float
    g0_inverse: Optional[np.ndarray] = None  # G_0 为单位阵时为 None


def _condition_estimate(K0: sparse.csc_matrix, solve, solve_adjoint) -> float:
    """1-范数条件数估计 ||K_0||_1 ||K_0^{-1}||_1"""
    inverse = splinalg.LinearOperator(
        K0.shape, matvec=solve, rmatvec=solve_adjoint, dtype=complex
    )
    return float(splinalg.onenormest(K0) * splinalg.onenormest(inverse))


def precond_prepare(
    K0: sparse.spmatrix,
    storage: PrecondStorage = PrecondStorage.FACTORIZED,
    G0: Optional[sparse.spmatrix] = None,
    cond_limit: Optional[float] = None,
) -> MeanPreconditioner:
    """
    预先分解 K_0（或显式求逆），供每次迭代重复使用

    Args:
        K0: 均值刚度矩阵
        storage: factorized 为稀疏LU，inverse 为显式稠密逆
        G0: 随机均值矩阵，须为对角阵；默认单位阵
        cond_limit: 条件数上限，默认 settings.PRECOND_COND_LIMIT

    Returns:
        MeanPreconditioner: 预条件子

    Raises:
        SingularMatrixError: K_0 奇异或条件数超限
    """
    cond_limit = settings.PRECOND_COND_LIMIT if cond_limit is None else cond_limit
    storage = PrecondStorage(storage)
    K0 = sparse.csc_matrix(K0, dtype=complex)
    if K0.shape[0] != K0.shape[1]:
        raise DimensionMismatchError(f"K_0 must be square, got {K0.shape}")

    try:
        if storage is PrecondStorage.INVERSE:
            inverse = linalg.inv(K0.toarray())
            inverse_h = inverse.conj().T
            solve = lambda b: inverse @ b
            solve_adjoint = lambda b: inverse_h @ b
            nnz = int(np.count_nonzero(inverse))
        else:
            lu = splinalg.splu(K0)
            solve = lambda b: lu.solve(np.asarray(b, dtype=complex))
            solve_adjoint = lambda b: lu.solve(np.asarray(b, dtype=complex), trans="H")
            nnz = int(lu.L.nnz + lu.U.nnz)
    except (RuntimeError, linalg.LinAlgError) as e:
        logger.error(f"Failed to factorize K_0: {str(e)}")
        raise SingularMatrixError(f"K_0 is singular: {e}") from e

    condition = _condition_estimate(K0, solve, solve_adjoint)
    if not np.isfinite(condition) or condition > cond_limit:
        logger.error(f"K_0 condition estimate {condition:.3e} exceeds {cond_limit:.3e}")
        raise SingularMatrixError("K_0 is ill-conditioned", condition_estimate=condition)

    g0_inverse = None
    if G0 is not None:
        G0 = sparse.csr_matrix(G0)
        diagonal = G0.diagonal()
        if (G0 - sparse.diags(diagonal)).count_nonzero():
            raise DimensionMismatchError("G_0 must be diagonal for the mean-based preconditioner")
        if np.any(diagonal == 0):
            raise SingularMatrixError("G_0 has a zero diagonal entry")
        if np.any(diagonal != 1.0):
            g0_inverse = 1.0 / diagonal

    logger.info(
        f"Prepared mean preconditioner: J={K0.shape[0]}, storage={storage.value}, "
        f"nnz={nnz}, cond~{condition:.3e}"
    )
    return MeanPreconditioner(
        J=K0.shape[0],
        storage=storage,
        solve=solve,
        solve_adjoint=solve_adjoint,
        nnz=nnz,
        condition_estimate=condition,
        g0_inverse=g0_inverse,
    )


def precond_apply(M: MeanPreconditioner, R: LowRankFactor, adjoint: bool = False) -> LowRankFactor:
    """
    因子形式的预条件：X_u = K_0^{-1} R_u，X_v = G_0^{-1} R_v（G_0 = I 时不变）

    Args:
        M: 预条件子
        R: 低秩残差
        adjoint: 是否使用 (M_0^H)^{-1}

    Returns:
        LowRankFactor: 秩不变
    """
    if R.shape[0] != M.J:
        raise DimensionMismatchError(f"Factor has {R.shape[0]} rows, preconditioner expects {M.J}")
    if R.rank == 0:
        return R
    solve = M.solve_adjoint if adjoint else M.solve
    V = R.V
    if M.g0_inverse is not None:
        if V.shape[0] != M.g0_inverse.size:
            raise DimensionMismatchError("Stochastic dimension does not match G_0")
        scale = M.g0_inverse.conj() if adjoint else M.g0_inverse
        V = V * scale[:, None]
    return LowRankFactor(solve(R.U), V)


def precond_apply_full(M: MeanPreconditioner, r: np.ndarray, adjoint: bool = False) -> np.ndarray:
    """全秩向量上的预条件：把 r 重排为 J x Q_s 后逐列求解"""
    r = np.asarray(r, dtype=complex)
    if r.ndim != 1 or r.size % M.J:
        raise DimensionMismatchError(f"Vector of length {r.size} is not a multiple of J={M.J}")
    cols = r.size // M.J
    if not np.any(r):
        return r.copy()
    solve = M.solve_adjoint if adjoint else M.solve
    Y = solve(unvec(r, M.J, cols))
    if M.g0_inverse is not None:
        scale = M.g0_inverse.conj() if adjoint else M.g0_inverse
        Y = Y * scale[None, :]
    return vec(Y)

"""
低秩矩阵运算

求解器中的"向量"以 X = U V^T 的因子形式存储，vec(X) 为按列展开。
截断后的标准形式：V 的列正交归一，U 的列两两正交且范数等于保留的奇异值。
"""

from dataclasses import dataclass
from numbers import Number

import numpy as np
from scipy import linalg

from ..core.errors import DimensionMismatchError


@dataclass(frozen=True, eq=False)
class LowRankFactor:
    """低秩因子 X = U V^T"""

    U: np.ndarray  # J x r
    V: np.ndarray  # Q_s x r

    def __post_init__(self):
        U = np.asarray(self.U, dtype=complex)
        V = np.asarray(self.V, dtype=complex)
        if U.ndim != 2 or V.ndim != 2:
            raise DimensionMismatchError("Low-rank factors must be 2-D arrays")
        if U.shape[1] != V.shape[1]:
            raise DimensionMismatchError(
                f"Factor column counts differ: U has {U.shape[1]}, V has {V.shape[1]}"
            )
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "V", V)

    @property
    def rank(self) -> int:
        return self.U.shape[1]

    @property
    def shape(self) -> tuple:
        """外部维度 (J, Q_s)"""
        return self.U.shape[0], self.V.shape[0]

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "LowRankFactor":
        """秩为0的零矩阵"""
        return cls(np.zeros((rows, 0), dtype=complex), np.zeros((cols, 0), dtype=complex))

    def to_dense(self) -> np.ndarray:
        """稠密形式 U V^T"""
        return self.U @ self.V.T

    def to_vector(self) -> np.ndarray:
        """vec(U V^T)，按列展开"""
        return vec(self.to_dense())


def vec(X: np.ndarray) -> np.ndarray:
    """矩阵按列展开为向量"""
    return np.asarray(X).reshape(-1, order="F")


def unvec(x: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """vec 的逆运算"""
    return np.asarray(x).reshape((rows, cols), order="F")


def retained_rank(singular_values: np.ndarray, eps_rel: float) -> int:
    """
    尾部规则：最小的 r 使得 sqrt(sum_{i>r} s_i^2) <= eps_rel * sqrt(sum_i s_i^2)

    Args:
        singular_values: 降序排列的奇异值
        eps_rel: 相对精度

    Returns:
        int: 保留的奇异值个数
    """
    squares = np.asarray(singular_values, dtype=float) ** 2
    total = squares.sum()
    if total == 0.0:
        return 0
    # tails[r] = sqrt(sum_{i>=r} s_i^2), tails[n] = 0
    tails = np.sqrt(np.append(np.cumsum(squares[::-1])[::-1], 0.0))
    return int(np.argmax(tails <= eps_rel * np.sqrt(total)))


def lr_from_dense(M: np.ndarray, eps_rel: float) -> LowRankFactor:
    """
    由稠密矩阵构造截断后的低秩因子

    Args:
        M: 稠密矩阵
        eps_rel: 相对精度（Frobenius范数）

    Returns:
        LowRankFactor: 标准形式的低秩因子
    """
    if eps_rel < 0:
        raise ValueError("eps_rel must be non-negative")
    M = np.asarray(M, dtype=complex)
    if M.size == 0 or not np.any(M):
        return LowRankFactor.zeros(*M.shape)
    W, s, Zh = linalg.svd(M, full_matrices=False)
    r = retained_rank(s, eps_rel)
    return LowRankFactor(W[:, :r] * s[:r], Zh[:r].T)


def lr_truncate(X: LowRankFactor, eps_rel: float) -> LowRankFactor:
    """
    截断算子 T：不形成 J x Q_s 稠密矩阵

    分别对 U、V 做瘦QR分解，再对小的核心矩阵做SVD。

    Args:
        X: 低秩因子
        eps_rel: 相对精度

    Returns:
        LowRankFactor: 标准形式，||X - T(X)||_F <= eps_rel ||X||_F
    """
    if X.rank == 0:
        return X
    Qu, Ru = linalg.qr(X.U, mode="economic")
    Qv, Rv = linalg.qr(X.V, mode="economic")
    W, s, Zh = linalg.svd(Ru @ Rv.T, full_matrices=False)
    r = retained_rank(s, eps_rel)
    return LowRankFactor((Qu @ W[:, :r]) * s[:r], Qv @ Zh[:r].T)


def _check_same_shape(X: LowRankFactor, Y: LowRankFactor):
    if X.shape != Y.shape:
        raise DimensionMismatchError(f"Outer dimensions differ: {X.shape} vs {Y.shape}")


def lr_add(X: LowRankFactor, Y: LowRankFactor) -> LowRankFactor:
    """低秩加法：因子并排拼接，秩为 r_X + r_Y，不截断"""
    _check_same_shape(X, Y)
    return LowRankFactor(np.hstack([X.U, Y.U]), np.hstack([X.V, Y.V]))


def lr_scale(X: LowRankFactor, s: Number) -> LowRankFactor:
    """数乘，只缩放 U"""
    return LowRankFactor(X.U * s, X.V)


def lr_inner(X: LowRankFactor, Y: LowRankFactor) -> complex:
    """
    迹内积 vec(Y)^H vec(X)

    第二个参数取共轭：算法中的 <R~, Z> 对应 lr_inner(Z, R~)。
    通过两个 r_Y x r_X 的Gram矩阵计算。
    """
    _check_same_shape(X, Y)
    if X.rank == 0 or Y.rank == 0:
        return 0j
    return complex(np.sum((Y.U.conj().T @ X.U) * (Y.V.conj().T @ X.V)))


def lr_frob_norm(X: LowRankFactor) -> float:
    """Frobenius范数"""
    return float(np.sqrt(max(lr_inner(X, X).real, 0.0)))

"""
多元 Legendre 混沌基与随机矩阵 G_0..G_N

随机变量 xi ~ U[-sqrt(3), sqrt(3)]^N，单变量基为单位二阶矩归一化的 Legendre 多项式：
    L_n(xi) = sqrt(2n+1) P_n(xi / sqrt(3))
"""

from dataclasses import dataclass
from math import comb, prod, sqrt
from typing import Dict, Iterator, List, Sequence, Tuple

import numpy as np
from numpy.polynomial import legendre
from scipy import sparse
from scipy.special import eval_legendre

MultiIndex = Tuple[int, ...]

SQRT3 = sqrt(3.0)


@dataclass(frozen=True)
class MultiIndexSet:
    """总阶数不超过 Q 的多重指标集合，按阶数分级、阶内字典序降序"""

    N: int
    Q: int
    indices: Tuple[MultiIndex, ...]

    @property
    def size(self) -> int:
        """基函数个数 Q_s = binomial(N+Q, N)"""
        return len(self.indices)

    def position(self) -> Dict[MultiIndex, int]:
        """多重指标到行号的映射"""
        return {idx: pos for pos, idx in enumerate(self.indices)}


@dataclass(frozen=True)
class StochasticMatrices:
    """随机矩阵 G_0 (单位阵) 与 G_1..G_N"""

    G: Tuple[sparse.csr_matrix, ...]

    @property
    def N(self) -> int:
        return len(self.G) - 1

    @property
    def size(self) -> int:
        return self.G[0].shape[0]


def _compositions(n_vars: int, degree: int) -> Iterator[MultiIndex]:
    """长度为 n_vars、和为 degree 的非负整数元组，字典序降序"""
    if n_vars == 1:
        yield (degree,)
        return
    for first in range(degree, -1, -1):
        for rest in _compositions(n_vars - 1, degree - first):
            yield (first,) + rest


def basis_count(N: int, Q: int) -> int:
    """基函数个数 (N+Q)!/(N!Q!)"""
    return comb(N + Q, N)


def build_multi_index_set(N: int, Q: int) -> MultiIndexSet:
    """
    构造完整的总阶数多重指标集合

    Args:
        N: 随机变量个数
        Q: 最高总阶数

    Returns:
        MultiIndexSet: 第一个指标为全零
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    if Q < 0:
        raise ValueError("Q must be non-negative")
    indices = tuple(
        idx for degree in range(Q + 1) for idx in _compositions(N, degree)
    )
    return MultiIndexSet(N=N, Q=Q, indices=indices)


def normalized_legendre(n: int, xi) -> np.ndarray:
    """[-sqrt(3), sqrt(3)] 上单位二阶矩归一化的 n 阶 Legendre 多项式"""
    return sqrt(2 * n + 1) * eval_legendre(n, np.asarray(xi, dtype=float) / SQRT3)


def eval_basis(idx: Sequence[int], xi: Sequence[float]) -> float:
    """多元基函数 psi_idx(xi) = prod_i L_{idx_i}(xi_i)"""
    if len(idx) != len(xi):
        raise ValueError("Multi-index and sample point have different lengths")
    return float(prod(normalized_legendre(n, x) for n, x in zip(idx, xi)))


def recurrence_coefficient(n: int) -> float:
    """<xi L_n L_{n+1}> = sqrt(3) (n+1) / sqrt((2n+1)(2n+3))"""
    return SQRT3 * (n + 1) / sqrt((2 * n + 1) * (2 * n + 3))


def assemble_G(mis: MultiIndexSet) -> StochasticMatrices:
    """
    由三项递推解析地组装随机矩阵

    G_i(j,k) 仅当 j、k 只在第 i 个坐标上相差 1 时非零。

    Args:
        mis: 多重指标集合

    Returns:
        StochasticMatrices: G_0 = I
    """
    size = mis.size
    lookup = mis.position()
    G: List[sparse.csr_matrix] = [sparse.identity(size, dtype=float, format="csr")]
    for i in range(mis.N):
        rows, cols, vals = [], [], []
        for j, idx in enumerate(mis.indices):
            upper = idx[:i] + (idx[i] + 1,) + idx[i + 1:]
            k = lookup.get(upper)
            if k is None:
                continue
            coef = recurrence_coefficient(idx[i])
            rows += [j, k]
            cols += [k, j]
            vals += [coef, coef]
        G.append(sparse.csr_matrix((vals, (rows, cols)), shape=(size, size)))
    return StochasticMatrices(G=tuple(G))


def _gauss_rule(quad_order: int) -> Tuple[np.ndarray, np.ndarray]:
    """均匀分布 U[-sqrt(3), sqrt(3)] 下的 Gauss-Legendre 节点与概率权重"""
    t, w = legendre.leggauss(quad_order)
    return SQRT3 * t, w / 2.0


def triple_product_oracle(i: int, j: Sequence[int], k: Sequence[int], quad_order: int) -> float:
    """
    张量 Gauss 求积计算 <xi_i psi_j psi_k>（i=0 时为 <psi_j psi_k>）

    被积函数是各坐标因子的乘积，张量积规则等于一维规则的乘积。

    Args:
        i: 随机变量编号（从1开始），0 表示不乘 xi
        j: 多重指标
        k: 多重指标
        quad_order: 每个方向的求积点数，需 >= Q+1

    Returns:
        float: 求积结果
    """
    nodes, weights = _gauss_rule(quad_order)
    value = 1.0
    for m, (jm, km) in enumerate(zip(j, k), start=1):
        integrand = normalized_legendre(jm, nodes) * normalized_legendre(km, nodes)
        if m == i:
            integrand = integrand * nodes
        value *= float(np.dot(weights, integrand))
    return value


def basis_gram_matrix(mis: MultiIndexSet, quad_order: int) -> np.ndarray:
    """求积得到的基函数Gram矩阵，应为单位阵"""
    size = mis.size
    gram = np.empty((size, size))
    for a, ja in enumerate(mis.indices):
        for b, kb in enumerate(mis.indices):
            gram[a, b] = triple_product_oracle(0, ja, kb, quad_order)
    return gram

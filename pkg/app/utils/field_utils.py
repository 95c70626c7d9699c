"""
随机系数 alpha(x, xi) 的截断KL展开

特征对取可分离指数族的显式形式：
    v_{i,j} = 1/4 exp(-pi (i^2 + j^2) l^2),  phi_{i,j}(x, y) = 2 cos(i pi x) cos(j pi y)
"""

from dataclasses import dataclass
from math import exp, pi, sqrt
from typing import Sequence, Tuple

import numpy as np

SQRT3 = sqrt(3.0)


@dataclass(frozen=True)
class KLMode:
    """单个KL模态"""

    sqrt_lambda: float
    i: int
    j: int

    def phi(self, x, y) -> np.ndarray:
        """特征函数 2 cos(i pi x) cos(j pi y)，支持数组输入"""
        return 2.0 * np.cos(self.i * pi * np.asarray(x)) * np.cos(self.j * pi * np.asarray(y))


@dataclass(frozen=True)
class KLExpansion:
    """截断KL展开"""

    mean: float
    sigma: float
    length: float
    modes: Tuple[KLMode, ...]

    @property
    def N(self) -> int:
        return len(self.modes)

    def coefficient(self, m: int, x, y) -> np.ndarray:
        """
        第 m 个确定性系数函数

        m = 0 时为均值，m >= 1 时为 sigma sqrt(lambda_m) phi_m。
        """
        if m == 0:
            return np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape, self.mean, dtype=float)
        mode = self.modes[m - 1]
        return self.sigma * mode.sqrt_lambda * mode.phi(x, y)


def kle_eigenpairs(N: int, length: float, sigma: float, mean: float) -> KLExpansion:
    """
    枚举 (i, j)，按 v_{i,j} 降序排列（并列时按 (i, j) 字典序），取前 N 个

    i, j <= N 的范围已包含前 N 个特征值：任何 i > N 的对都有 i^2+j^2 > 1+N^2。

    Args:
        N: 截断长度
        length: 相关长度 l
        sigma: 标准差
        mean: 均值

    Returns:
        KLExpansion: 模态按 sqrt(lambda) 非增排列
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    if length <= 0:
        raise ValueError("Correlation length must be positive")
    pairs = sorted(
        ((i, j) for i in range(1, N + 1) for j in range(1, N + 1)),
        key=lambda ij: (ij[0] ** 2 + ij[1] ** 2, ij[0], ij[1]),
    )[:N]
    modes = tuple(
        KLMode(sqrt_lambda=sqrt(0.25 * exp(-pi * (i * i + j * j) * length ** 2)), i=i, j=j)
        for i, j in pairs
    )
    return KLExpansion(mean=mean, sigma=sigma, length=length, modes=modes)


def eval_field(kle: KLExpansion, x: Sequence[float], xi: Sequence[float]) -> float:
    """alpha_N(x, xi) = mean + sigma sum_m sqrt(lambda_m) phi_m(x) xi_m"""
    if len(xi) != kle.N:
        raise ValueError(f"Expected {kle.N} random variables, got {len(xi)}")
    value = kle.mean
    for m, xi_m in enumerate(xi, start=1):
        value += float(kle.coefficient(m, x[0], x[1])) * xi_m
    return float(value)


def positivity_check(kle: KLExpansion, grid_n: int) -> Tuple[float, bool]:
    """
    最坏情况下界 mean - sigma sqrt(3) sum_m sqrt(lambda_m) |phi_m(x)| 在网格上的最小值

    Args:
        kle: KL展开
        grid_n: 每个方向的网格点数

    Returns:
        Tuple[float, bool]: (beta_1 估计, 是否一致正定)
    """
    if grid_n < 2:
        raise ValueError("grid_n must be at least 2")
    axis = np.linspace(0.0, 1.0, grid_n)
    x, y = np.meshgrid(axis, axis, indexing="ij")
    perturbation = np.zeros_like(x)
    for mode in kle.modes:
        perturbation += mode.sqrt_lambda * np.abs(mode.phi(x, y))
    bound = kle.mean - kle.sigma * SQRT3 * perturbation
    beta1 = float(bound.min())
    return beta1, beta1 > 0.0

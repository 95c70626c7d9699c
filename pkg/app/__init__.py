"""随机 Helmholtz 方程的随机Galerkin有限元与低秩 BiCG 求解"""

__version__ = "0.1.0"

from pathlib import Path

import numpy as np
import pytest
from scipy import sparse

from app.schemas.case import ProblemConfig
from app.services.case_service import assemble_case
from app.services.galerkin_service import KronOperator
from app.utils.lowrank_utils import LowRankFactor


def random_kron_operator(rng: np.random.Generator, J: int, Q_s: int, N: int, density: float = 0.3) -> KronOperator:
    """随机的小规模 Kronecker 算子：G_i 实对称，K_i 复稀疏"""
    G, K = [], []
    for _ in range(N + 1):
        g = rng.standard_normal((Q_s, Q_s)) * (rng.random((Q_s, Q_s)) < density)
        G.append(sparse.csr_matrix(g + g.T + np.eye(Q_s)))
        mask = rng.random((J, J)) < density
        k = (rng.standard_normal((J, J)) + 1j * rng.standard_normal((J, J))) * mask
        K.append(sparse.csr_matrix(k + np.eye(J)))
    return KronOperator(G=tuple(G), K=tuple(K))


def random_factor(rng: np.random.Generator, rows: int, cols: int, rank: int) -> LowRankFactor:
    U = rng.standard_normal((rows, rank)) + 1j * rng.standard_normal((rows, rank))
    V = rng.standard_normal((cols, rank)) + 1j * rng.standard_normal((cols, rank))
    return LowRankFactor(U, V)


@pytest.fixture
def rng():
    return np.random.default_rng(20240521)


@pytest.fixture(scope="session")
def small_config():
    return ProblemConfig(N=2, Q=2, Np=6, c=0.0)


@pytest.fixture(scope="session")
def small_case(small_config):
    return assemble_case(small_config)


@pytest.fixture(scope="session")
def helmholtz_case():
    return assemble_case(ProblemConfig(N=2, Q=2, Np=6, c=1.5, c_pi=True))


@pytest.fixture
def data_dir(tmp_path, monkeypatch):
    """把默认输出目录重定向到临时目录"""
    from app.core.config import settings

    monkeypatch.setattr(settings, "DATA_DIR", str(tmp_path))
    return tmp_path


PI_MULTIPLES = (0.0, 1.5, 3.5)
BENCH_DIR = Path(__file__).resolve().parent.parent / "bench"

"""
单位正方形上的分片线性有限元：网格、K_0..K_N、Dirichlet 提升和载荷向量

K_i 的弱形式（w_0 = mean, w_i = sigma sqrt(lambda_i) phi_i）：
    K_i(j,k) = int w_i grad s_j . grad s_k - c^2 int w_i s_j s_k + i c int_{Robin} w_i s_j s_k ds
Dirichlet 行列被消去，耦合块存入 K0B。
"""

from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, Iterable, Optional, Tuple, Union

import numpy as np
from numpy.polynomial import legendre
from scipy import linalg, sparse

from ..core.config import settings
from ..core.errors import ConfigurationError, SizeLimitError
from ..core.logging import logger
from ..models.solver import NodeKind
from .field_utils import KLExpansion

EDGES = ("left", "right", "bottom", "top")

FieldLike = Union[float, Callable[[np.ndarray, np.ndarray], np.ndarray]]

# 单元上的修正钩子：(单元顶点坐标 T x 3 x 2, 局部矩阵 T x 3 x 3, 模态编号) -> 局部矩阵
ElementModifier = Callable[[np.ndarray, np.ndarray, int], np.ndarray]


@dataclass(frozen=True)
class TriangleRule:
    """三角形上的求积规则（重心坐标 + 面积归一化权重）"""

    name: str
    barycentric: np.ndarray  # q x 3
    weights: np.ndarray      # q, 和为1
    edge_points: int         # 边界积分的 Gauss 点数


_A1, _B1 = 0.059715871789770, 0.470142064105115
_A2, _B2 = 0.797426985353087, 0.101286507323456

TRIANGLE_RULES: Dict[str, TriangleRule] = {
    # 三点中点规则，对二次多项式精确
    "midpoint": TriangleRule(
        name="midpoint",
        barycentric=np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]),
        weights=np.full(3, 1.0 / 3.0),
        edge_points=2,
    ),
    # 七点规则，对五次多项式精确
    "strang-fix7": TriangleRule(
        name="strang-fix7",
        barycentric=np.array([
            [1 / 3, 1 / 3, 1 / 3],
            [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
            [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2],
        ]),
        weights=np.array([0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3),
        edge_points=4,
    ),
}


@dataclass(frozen=True)
class TriMesh:
    """单位正方形上的均匀直角三角形网格"""

    Np: int
    nodes: np.ndarray        # n x 2
    triangles: np.ndarray    # T x 3，逆时针
    kind: np.ndarray         # n，NodeKind
    robin_edges: np.ndarray  # E x 2
    dirichlet_edges: FrozenSet[str]

    @property
    def h(self) -> float:
        return 1.0 / (self.Np - 1)

    @property
    def free_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.kind != NodeKind.DIRICHLET)

    @property
    def dirichlet_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.kind == NodeKind.DIRICHLET)

    @property
    def J(self) -> int:
        return int(self.free_nodes.size)

    @property
    def j_b(self) -> int:
        return int(self.dirichlet_nodes.size)


@dataclass(frozen=True)
class HelmholtzMatrices:
    """确定性矩阵 K_0..K_N（自由自由度）与 Dirichlet 耦合块 K0B (j_b x J)"""

    K: Tuple[sparse.csr_matrix, ...]
    K0B: sparse.csr_matrix


@dataclass(frozen=True)
class RhsData:
    """载荷 f0、Dirichlet 值 wB 与提升项 lift = K0B^T wB"""

    f0: np.ndarray
    wB: np.ndarray
    lift: np.ndarray

    @property
    def rhs(self) -> np.ndarray:
        """右端项的空间因子 f0 - lift"""
        return self.f0 - self.lift


def _edge_mask(nodes: np.ndarray, edge: str) -> np.ndarray:
    x, y = nodes[:, 0], nodes[:, 1]
    if edge == "left":
        return np.isclose(x, 0.0)
    if edge == "right":
        return np.isclose(x, 1.0)
    if edge == "bottom":
        return np.isclose(y, 0.0)
    return np.isclose(y, 1.0)


def build_mesh(Np: int, dirichlet_edges: Iterable[str] = ("left",)) -> TriMesh:
    """
    构造 Np x Np 节点的均匀网格，每个小正方形剖分为两个三角形

    Args:
        Np: 每个方向的点数
        dirichlet_edges: Dirichlet 边集合，其余边为 Robin 边

    Returns:
        TriMesh: 2(Np-1)^2 个三角形
    """
    if Np < 3:
        raise ConfigurationError(f"Np must be at least 3, got {Np}")
    dirichlet = frozenset(dirichlet_edges)
    unknown = dirichlet - set(EDGES)
    if unknown:
        raise ConfigurationError(f"Unknown boundary edges: {sorted(unknown)}")

    axis = np.linspace(0.0, 1.0, Np)
    # 节点编号 n = iy * Np + ix
    xx, yy = np.meshgrid(axis, axis, indexing="xy")
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    ix, iy = np.meshgrid(np.arange(Np - 1), np.arange(Np - 1), indexing="xy")
    a = (iy * Np + ix).ravel()
    b, c, d = a + 1, a + Np + 1, a + Np
    triangles = np.vstack([np.column_stack([a, b, c]), np.column_stack([a, c, d])])

    kind = np.full(Np * Np, NodeKind.INTERIOR, dtype=int)
    robin_edges = []
    for edge in EDGES:
        mask = _edge_mask(nodes, edge)
        if edge in dirichlet:
            kind[mask] = NodeKind.DIRICHLET
            continue
        kind[mask & (kind != NodeKind.DIRICHLET)] = NodeKind.ROBIN
        side = np.flatnonzero(mask)
        # 沿边排序后相邻节点构成边界边
        order = np.argsort(nodes[side, 1] if edge in ("left", "right") else nodes[side, 0])
        side = side[order]
        robin_edges.append(np.column_stack([side[:-1], side[1:]]))

    # Robin 边上与 Dirichlet 边相交的角点已归为 Dirichlet
    return TriMesh(
        Np=Np,
        nodes=nodes,
        triangles=triangles,
        kind=kind,
        robin_edges=np.vstack(robin_edges) if robin_edges else np.zeros((0, 2), dtype=int),
        dirichlet_edges=dirichlet,
    )


def _as_field(value: FieldLike) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    if callable(value):
        return value
    constant = float(value)
    return lambda x, y: np.full(np.broadcast(x, y).shape, constant)


def _element_geometry(mesh: TriMesh) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """单元顶点坐标、面积与重心坐标梯度"""
    coords = mesh.nodes[mesh.triangles]  # T x 3 x 2
    x, y = coords[..., 0], coords[..., 1]
    det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    grads = np.empty_like(coords)
    grads[:, 0] = np.column_stack([y[:, 1] - y[:, 2], x[:, 2] - x[:, 1]])
    grads[:, 1] = np.column_stack([y[:, 2] - y[:, 0], x[:, 0] - x[:, 2]])
    grads[:, 2] = np.column_stack([y[:, 0] - y[:, 1], x[:, 1] - x[:, 0]])
    grads /= det[:, None, None]
    return coords, 0.5 * np.abs(det), grads


def _coefficient(kle: KLExpansion, i: int) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    return lambda x, y: kle.coefficient(i, x, y)


def assemble_full_K(
    mesh: TriMesh,
    kle: KLExpansion,
    c: float,
    i: int,
    rule: str = "midpoint",
    element_modifier: Optional[ElementModifier] = None,
) -> sparse.csr_matrix:
    """
    在全部节点上组装 K_i（尚未消去 Dirichlet 自由度）

    Args:
        mesh: 网格
        kle: KL展开
        c: 波数
        i: 模态编号 0..N
        rule: 系数求积规则名
        element_modifier: 可选的单元矩阵修正（稳定化方法的扩展点）

    Returns:
        sparse.csr_matrix: n x n 复矩阵
    """
    if not 0 <= i <= kle.N:
        raise ValueError(f"Mode index {i} out of range 0..{kle.N}")
    quad = TRIANGLE_RULES[rule]
    coef = _coefficient(kle, i)
    coords, area, grads = _element_geometry(mesh)

    points = np.einsum("qk,tkd->tqd", quad.barycentric, coords)  # T x q x 2
    values = coef(points[..., 0], points[..., 1])                 # T x q
    weighted = values * quad.weights                              # T x q

    stiffness = np.einsum("tjd,tkd->tjk", grads, grads) * (area * weighted.sum(axis=1))[:, None, None]
    mass = np.einsum("tq,qj,qk->tjk", weighted, quad.barycentric, quad.barycentric) * area[:, None, None]
    local = (stiffness - c ** 2 * mass).astype(complex)
    if element_modifier is not None:
        local = element_modifier(coords, local, i)

    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    data = local.ravel()

    if c != 0.0 and mesh.robin_edges.size:
        edge_rows, edge_cols, edge_data = _robin_term(mesh, coef, quad.edge_points)
        rows = np.concatenate([rows, edge_rows])
        cols = np.concatenate([cols, edge_cols])
        data = np.concatenate([data, 1j * c * edge_data])

    n = mesh.nodes.shape[0]
    return sparse.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()


def _robin_term(mesh: TriMesh, coef, n_points: int):
    """边界质量矩阵 int_{Robin} w s_j s_k ds"""
    t, w = legendre.leggauss(n_points)
    s = 0.5 * (t + 1.0)
    w = 0.5 * w
    shape = np.column_stack([1.0 - s, s])                        # q x 2
    start = mesh.nodes[mesh.robin_edges[:, 0]]
    end = mesh.nodes[mesh.robin_edges[:, 1]]
    length = np.linalg.norm(end - start, axis=1)
    points = start[:, None, :] + s[None, :, None] * (end - start)[:, None, :]  # E x q x 2
    values = coef(points[..., 0], points[..., 1]) * w             # E x q
    local = np.einsum("eq,qa,qb->eab", values, shape, shape) * length[:, None, None]
    rows = np.repeat(mesh.robin_edges, 2, axis=1).ravel()
    cols = np.tile(mesh.robin_edges, (1, 2)).ravel()
    return rows, cols, local.ravel()


def assemble_K(
    mesh: TriMesh,
    kle: KLExpansion,
    c: float,
    i: int,
    rule: str = "midpoint",
    element_modifier: Optional[ElementModifier] = None,
) -> sparse.csr_matrix:
    """组装消去 Dirichlet 行列后的 K_i (J x J)"""
    full = assemble_full_K(mesh, kle, c, i, rule=rule, element_modifier=element_modifier)
    free = mesh.free_nodes
    return full[free][:, free].tocsr()


def assemble_helmholtz(
    mesh: TriMesh,
    kle: KLExpansion,
    c: float,
    rule: str = "midpoint",
    element_modifier: Optional[ElementModifier] = None,
) -> HelmholtzMatrices:
    """
    组装全部 K_i 以及 K0B

    Args:
        mesh: 网格
        kle: KL展开
        c: 波数
        rule: 系数求积规则名
        element_modifier: 可选的单元矩阵修正

    Returns:
        HelmholtzMatrices: K_0..K_N 与 K0B
    """
    free, dirichlet = mesh.free_nodes, mesh.dirichlet_nodes
    K = []
    K0B = None
    for i in range(kle.N + 1):
        full = assemble_full_K(mesh, kle, c, i, rule=rule, element_modifier=element_modifier)
        K.append(full[free][:, free].tocsr())
        if i == 0:
            K0B = full[dirichlet][:, free].tocsr()
    logger.info(
        f"Assembled {len(K)} Helmholtz matrices: J={mesh.J}, j_b={mesh.j_b}, "
        f"nnz(K_0)={K[0].nnz}, c={c:.4f}"
    )
    return HelmholtzMatrices(K=tuple(K), K0B=K0B)


def assemble_rhs(
    mesh: TriMesh,
    matrices: HelmholtzMatrices,
    f: FieldLike,
    g: FieldLike,
    rule: str = "midpoint",
) -> RhsData:
    """
    载荷向量 f0(j) = int f s_j 与提升项 K0B^T wB

    Args:
        mesh: 网格
        matrices: 已组装的矩阵
        f: 源项（常数或函数）
        g: Dirichlet 边界值（常数或函数）
        rule: 求积规则名

    Returns:
        RhsData: f0、wB、lift
    """
    quad = TRIANGLE_RULES[rule]
    f_fn, g_fn = _as_field(f), _as_field(g)
    coords, area, _ = _element_geometry(mesh)
    points = np.einsum("qk,tkd->tqd", quad.barycentric, coords)
    values = f_fn(points[..., 0], points[..., 1]) * quad.weights          # T x q
    local = np.einsum("tq,qj->tj", values, quad.barycentric) * area[:, None]
    load = np.zeros(mesh.nodes.shape[0], dtype=complex)
    np.add.at(load, mesh.triangles.ravel(), local.ravel())

    dirichlet = mesh.dirichlet_nodes
    wB = np.asarray(g_fn(mesh.nodes[dirichlet, 0], mesh.nodes[dirichlet, 1]), dtype=complex)
    lift = matrices.K0B.T @ wB
    return RhsData(f0=load[mesh.free_nodes], wB=wB, lift=np.asarray(lift).ravel())


def spectrum_K0(K0: sparse.spmatrix, limit: Optional[int] = None) -> np.ndarray:
    """
    稠密求解 K_0 的全部特征值

    Args:
        K0: 稀疏复矩阵
        limit: 允许的最大维数，默认 settings.DENSE_EIGEN_LIMIT

    Returns:
        np.ndarray: 复特征值
    """
    limit = settings.DENSE_EIGEN_LIMIT if limit is None else limit
    if K0.shape[0] > limit:
        raise SizeLimitError("spectrum_K0", K0.shape[0], limit)
    return linalg.eigvals(K0.toarray())

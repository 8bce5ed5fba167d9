"""
稠密线性代数工具

算符、密度矩阵与超算符的基本运算。向量化采用列堆叠约定：
vec(A X B) = (Bᵀ ⊗ A) vec(X)。
"""
from functools import reduce
from typing import Optional, Sequence, Union

import numpy as np
import scipy.linalg  # type: ignore

from src.config import settings
from src.models.quantum import (
    DensityOperator,
    DensityReport,
    HilbertSpace,
    Operator,
    Superoperator,
)

MatrixLike = Union[Operator, np.ndarray]


def _mat(op: MatrixLike) -> np.ndarray:
    return op.matrix if isinstance(op, (Operator, DensityOperator, Superoperator)) else np.asarray(op, dtype=np.complex128)


def identity(space: HilbertSpace) -> Operator:
    return Operator(space=space, matrix=np.eye(space.dim))


def projector(space: HilbertSpace, ket: np.ndarray) -> Operator:
    ket = np.asarray(ket, dtype=np.complex128)
    return Operator(space=space, matrix=np.outer(ket, ket.conj()))


def transition(space: HilbertSpace, to: str, frm: str) -> Operator:
    """单因子空间上的 |to⟩⟨frm|"""
    if len(space.factors) != 1:
        raise ValueError("transition 仅用于单因子空间")
    m = np.zeros((space.dim, space.dim), dtype=np.complex128)
    m[space.index(to), space.index(frm)] = 1.0
    return Operator(space=space, matrix=m)


def tensor(ops: Sequence[Operator], space: Optional[HilbertSpace] = None) -> Operator:
    """
    Kronecker 积（按声明顺序）

    Args:
        ops: 各因子上的算符
        space: 可选的联合空间声明，用于检查因子是否匹配

    Raises:
        ValueError: 空列表或维数不匹配
    """
    if not ops:
        raise ValueError("tensor 需要至少一个算符")
    joint = reduce(lambda a, b: a.compose(b), [op.space for op in ops])
    if space is not None and space.factors != joint.factors:
        raise ValueError(f"因子维数 {joint.factors} 与声明空间 {space.factors} 不匹配")
    matrix = reduce(np.kron, [op.matrix for op in ops])
    return Operator(space=space or joint, matrix=matrix)


def embed(op: Operator, index: int, space: HilbertSpace) -> Operator:
    """把单因子算符嵌入到联合空间的第 index 个因子"""
    if not 0 <= index < len(space.factors):
        raise ValueError(f"非法因子下标: {index}")
    if op.space.dim != space.factors[index]:
        raise ValueError(f"算符维数 {op.space.dim} 与第 {index} 个因子维数 {space.factors[index]} 不匹配")
    parts = [
        op if k == index else identity(space.subspace([k]))
        for k in range(len(space.factors))
    ]
    return tensor(parts, space)


def adjoint(op: Operator) -> Operator:
    return Operator(space=op.space, matrix=op.matrix.conj().T)


def vec(m: np.ndarray) -> np.ndarray:
    return np.asarray(m).reshape(-1, order="F")


def unvec(v: np.ndarray, d: int) -> np.ndarray:
    return np.asarray(v).reshape((d, d), order="F")


def spre(op: MatrixLike) -> np.ndarray:
    """X -> A X"""
    a = _mat(op)
    return np.kron(np.eye(a.shape[0]), a)


def spost(op: MatrixLike) -> np.ndarray:
    """X -> X B"""
    b = _mat(op)
    return np.kron(b.T, np.eye(b.shape[0]))


def sprepost(a: MatrixLike, b: MatrixLike) -> np.ndarray:
    """X -> A X B"""
    return np.kron(_mat(b).T, _mat(a))


def expm(s: Superoperator, t: float) -> Superoperator:
    """
    超算符指数 exp(s·t)

    使用 scipy 的缩放-平方 Padé 近似，对本项目的小尺寸稠密矩阵足够精确。

    Raises:
        ValueError: t < 0
    """
    if t < 0:
        raise ValueError(f"时间必须非负: {t}")
    if t == 0:
        return Superoperator.identity(s.space)
    return Superoperator(space=s.space, matrix=scipy.linalg.expm(s.matrix * t))


def partial_trace(rho: DensityOperator, keep: Sequence[int]) -> DensityOperator:
    """
    约化密度矩阵

    Args:
        rho: 输入密度矩阵
        keep: 保留的因子下标（按给定顺序输出）

    Raises:
        ValueError: keep 为空或包含非法下标
    """
    keep = list(keep)
    sub = rho.space.subspace(keep)
    dims = list(rho.space.factors)
    n = len(dims)
    traced = [k for k in range(n) if k not in keep]

    tensor_form = np.asarray(rho.matrix).reshape(dims + dims)
    row = list(range(n))
    col = [n + k for k in range(n)]
    for k in traced:
        col[k] = row[k]
    out_idx = [row[k] for k in keep] + [col[k] for k in keep]
    reduced = np.einsum(tensor_form, row + col, out_idx).reshape(sub.dim, sub.dim)
    return DensityOperator(space=sub, matrix=reduced, normalized=rho.normalized)


def fidelity(target: DensityOperator, rho: DensityOperator, normalize: bool = False) -> float:
    """
    与纯目标态的保真度 F = Tr[ρ_T ρ_M]

    Args:
        target: 纯目标态（秩 1）
        rho: 待测态
        normalize: 允许对亚归一化的 rho 先归一化

    Raises:
        ValueError: 目标态非纯态，或 rho 未归一化且未显式要求归一化
    """
    if target.space.dim != rho.space.dim:
        raise ValueError("目标态与待测态维数不一致")
    if abs(target.purity - 1.0) > 1e-8:
        raise ValueError(f"目标态不是纯态: purity {target.purity:.12g}")
    if not rho.normalized:
        if not normalize:
            raise ValueError("rho 为亚归一化态，需要 normalize=True")
        rho = rho.normalize()
    value = float(np.real(np.trace(target.matrix @ rho.matrix)))
    return min(1.0, max(0.0, value))


def check_density(rho: Union[DensityOperator, np.ndarray], tol: Optional[float] = None) -> DensityReport:
    """密度矩阵诊断：厄米性偏差、最小本征值、迹；tol 缺省取 settings.structural_tol"""
    if tol is None:
        tol = settings.structural_tol
    m = _mat(rho)
    herm = float(np.max(np.abs(m - m.conj().T)))
    min_eig = float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])
    tr = float(np.real(np.trace(m)))
    problems = []
    if herm > tol:
        problems.append(f"non-Hermitian ({herm:.3e})")
    if min_eig < -tol:
        problems.append(f"negative eigenvalue ({min_eig:.3e})")
    if not 0.0 < tr <= 1.0 + tol:
        problems.append(f"trace out of range ({tr:.12g})")
    return DensityReport(
        hermiticity=herm,
        min_eigenvalue=min_eig,
        trace=tr,
        tolerance=tol,
        passed=not problems,
        message="; ".join(problems) or None,
    )


def random_density(space: HilbertSpace, rng: np.random.Generator, rank: Optional[int] = None) -> DensityOperator:
    """Ginibre 随机密度矩阵"""
    d = space.dim
    k = rank or d
    g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    m = g @ g.conj().T
    return DensityOperator.from_matrix(space, m)

"""
量子态与算符的数据模型

基矢顺序：按因子行主序排列（第一个因子变化最慢）。
"""
from itertools import product
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.config import settings

# 常用基矢标签
TWO_LEVEL = ("e", "g")
LAMBDA_ATOM = ("e", "g", "r")
CAVITY = ("0", "1")
QUBIT = ("0", "1")


def _frozen_array(value) -> np.ndarray:
    arr = np.array(value, dtype=np.complex128, copy=True)
    arr.flags.writeable = False
    return arr


class HilbertSpace(BaseModel):
    """有限维张量积希尔伯特空间"""

    factors: Tuple[int, ...] = Field(..., description="各子系统维数")
    labels: Tuple[Tuple[str, ...], ...] = Field(..., description="各子系统的基矢标签")

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def validate_labels(self) -> "HilbertSpace":
        if not self.factors:
            raise ValueError("HilbertSpace 至少需要一个因子")
        if len(self.factors) != len(self.labels):
            raise ValueError("factors 与 labels 长度不一致")
        for dim, names in zip(self.factors, self.labels):
            if dim < 1:
                raise ValueError(f"非法维数: {dim}")
            if len(names) != dim or len(set(names)) != dim:
                raise ValueError(f"基矢标签与维数不匹配: {names}")
        return self

    @classmethod
    def of(cls, *label_sets: Sequence[str]) -> "HilbertSpace":
        """按标签构造空间，例如 HilbertSpace.of(TWO_LEVEL, TWO_LEVEL)"""
        labels = tuple(tuple(names) for names in label_sets)
        return cls(factors=tuple(len(names) for names in labels), labels=labels)

    @classmethod
    def qubits(cls, n: int) -> "HilbertSpace":
        return cls.of(*([QUBIT] * n))

    @property
    def dim(self) -> int:
        return int(np.prod(self.factors))

    def index(self, *labels: str) -> int:
        """多体基矢标签 -> 联合基矢下标"""
        if len(labels) != len(self.factors):
            raise ValueError(f"需要 {len(self.factors)} 个标签，实际 {len(labels)}")
        idx = 0
        for dim, names, label in zip(self.factors, self.labels, labels):
            if label not in names:
                raise ValueError(f"未知基矢标签: {label}")
            idx = idx * dim + names.index(label)
        return idx

    def ket(self, *labels: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.complex128)
        vec[self.index(*labels)] = 1.0
        return vec

    def basis(self) -> List[Tuple[str, ...]]:
        return list(product(*self.labels))

    def subspace(self, keep: Sequence[int]) -> "HilbertSpace":
        keep = list(keep)
        if not keep:
            raise ValueError("keep 不能为空")
        for k in keep:
            if not 0 <= k < len(self.factors):
                raise ValueError(f"非法因子下标: {k}")
        if len(set(keep)) != len(keep):
            raise ValueError("keep 中存在重复下标")
        return HilbertSpace(
            factors=tuple(self.factors[k] for k in keep),
            labels=tuple(self.labels[k] for k in keep),
        )

    def compose(self, other: "HilbertSpace") -> "HilbertSpace":
        return HilbertSpace(factors=self.factors + other.factors, labels=self.labels + other.labels)


class Operator(BaseModel):
    """稠密复矩阵算符"""

    space: HilbertSpace
    matrix: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("matrix", mode="before")
    @classmethod
    def _coerce(cls, value) -> np.ndarray:
        return _frozen_array(value)

    @model_validator(mode="after")
    def validate_shape(self) -> "Operator":
        d = self.space.dim
        if self.matrix.shape != (d, d):
            raise ValueError(f"算符维数 {self.matrix.shape} 与空间维数 {d} 不匹配")
        return self

    @property
    def dag(self) -> "Operator":
        return Operator(space=self.space, matrix=self.matrix.conj().T)

    def __matmul__(self, other: "Operator") -> "Operator":
        if other.space != self.space:
            raise ValueError("算符所在空间不一致")
        return Operator(space=self.space, matrix=self.matrix @ other.matrix)

    def __add__(self, other: "Operator") -> "Operator":
        if other.space != self.space:
            raise ValueError("算符所在空间不一致")
        return Operator(space=self.space, matrix=self.matrix + other.matrix)

    def __sub__(self, other: "Operator") -> "Operator":
        return self + other.scaled(-1.0)

    def scaled(self, factor: complex) -> "Operator":
        return Operator(space=self.space, matrix=factor * self.matrix)


class DensityOperator(BaseModel):
    """密度矩阵（归一化或条件化前的亚归一化）"""

    space: HilbertSpace
    matrix: np.ndarray
    normalized: bool = Field(default=True, description="False 表示尚未除以事件概率")

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("matrix", mode="before")
    @classmethod
    def _coerce(cls, value) -> np.ndarray:
        return _frozen_array(value)

    @model_validator(mode="after")
    def validate_state(self) -> "DensityOperator":
        d = self.space.dim
        m = self.matrix
        if m.shape != (d, d):
            raise ValueError(f"密度矩阵维数 {m.shape} 与空间维数 {d} 不匹配")
        tol = settings.structural_tol
        herm = float(np.max(np.abs(m - m.conj().T)))
        if herm > tol:
            raise ValueError(f"密度矩阵非厄米: 偏差 {herm:.3e}")
        min_eig = float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])
        if min_eig < -tol:
            raise ValueError(f"密度矩阵非正定: 最小本征值 {min_eig:.3e}")
        tr = float(np.real(np.trace(m)))
        if not 0.0 < tr <= 1.0 + tol:
            raise ValueError(f"迹超出 (0, 1]: {tr:.12g}")
        if self.normalized and abs(tr - 1.0) > tol:
            raise ValueError(f"标记为归一化但迹为 {tr:.12g}")
        return self

    @classmethod
    def from_ket(cls, space: HilbertSpace, ket: np.ndarray) -> "DensityOperator":
        ket = np.asarray(ket, dtype=np.complex128)
        ket = ket / np.linalg.norm(ket)
        return cls(space=space, matrix=np.outer(ket, ket.conj()))

    @classmethod
    def from_matrix(cls, space: HilbertSpace, matrix: np.ndarray, normalize: bool = True) -> "DensityOperator":
        """从数值矩阵构造：先厄米化，可选归一化"""
        m = np.asarray(matrix, dtype=np.complex128)
        m = 0.5 * (m + m.conj().T)
        if normalize:
            m = m / np.real(np.trace(m))
        return cls(space=space, matrix=m, normalized=normalize)

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def normalize(self) -> "DensityOperator":
        return DensityOperator(space=self.space, matrix=self.matrix / self.trace, normalized=True)

    def population(self, *labels: str) -> float:
        i = self.space.index(*labels)
        return float(np.real(self.matrix[i, i]))


class Superoperator(BaseModel):
    """作用在列堆叠向量化密度矩阵上的线性映射 (d²×d²)"""

    space: HilbertSpace
    matrix: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("matrix", mode="before")
    @classmethod
    def _coerce(cls, value) -> np.ndarray:
        return _frozen_array(value)

    @model_validator(mode="after")
    def validate_shape(self) -> "Superoperator":
        d2 = self.space.dim ** 2
        if self.matrix.shape != (d2, d2):
            raise ValueError(f"超算符维数 {self.matrix.shape} 与空间维数 {self.space.dim} 不匹配")
        return self

    @classmethod
    def zero(cls, space: HilbertSpace) -> "Superoperator":
        d2 = space.dim ** 2
        return cls(space=space, matrix=np.zeros((d2, d2)))

    @classmethod
    def identity(cls, space: HilbertSpace) -> "Superoperator":
        return cls(space=space, matrix=np.eye(space.dim ** 2))

    def apply(self, rho) -> np.ndarray:
        """作用于密度矩阵（DensityOperator 或 ndarray），返回矩阵"""
        m = rho.matrix if isinstance(rho, DensityOperator) else np.asarray(rho, dtype=np.complex128)
        d = self.space.dim
        out = self.matrix @ m.reshape(-1, order="F")
        return out.reshape((d, d), order="F")

    def __matmul__(self, other: "Superoperator") -> "Superoperator":
        return Superoperator(space=self.space, matrix=self.matrix @ other.matrix)

    def __add__(self, other: "Superoperator") -> "Superoperator":
        return Superoperator(space=self.space, matrix=self.matrix + other.matrix)

    def __sub__(self, other: "Superoperator") -> "Superoperator":
        return Superoperator(space=self.space, matrix=self.matrix - other.matrix)

    def scaled(self, factor: complex) -> "Superoperator":
        return Superoperator(space=self.space, matrix=factor * self.matrix)


class DensityReport(BaseModel):
    """密度矩阵诊断报告"""

    hermiticity: float = Field(..., description="max |ρ - ρ†|")
    min_eigenvalue: float = Field(..., description="厄米部分的最小本征值")
    trace: float
    tolerance: float = Field(default_factory=lambda: settings.structural_tol)
    passed: bool
    message: Optional[str] = None

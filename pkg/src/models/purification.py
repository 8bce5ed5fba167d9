"""
纠缠纯化相关的数据模型

Bell 系数顺序固定为 (Φ+, Ψ−, Ψ+, Φ−)。
"""
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

from src.models.quantum import DensityOperator, HilbertSpace
from src.utils.bell import bell_basis, bell_coefficients

_SUM_TOL = 1e-12


class LocalRotation(str, Enum):
    """每轮纯化前的双边局部旋转"""

    X = "x"  # Alice exp(−iπ/4 σx)，Bob exp(+iπ/4 σx)，交换 Φ− 与 Ψ−
    Z = "z"  # 绕 σz 的同样构造，交换 Ψ+ 与 Ψ−
    ADAPTIVE = "adaptive"  # 每轮取后选择 Φ+ 权重较大者，相等时取 x


class BellDiagonalState(BaseModel):
    """Bell 对角态"""

    a: float = Field(..., ge=0.0, le=1.0, description="Φ+ 权重")
    b: float = Field(..., ge=0.0, le=1.0, description="Ψ− 权重")
    c: float = Field(..., ge=0.0, le=1.0, description="Ψ+ 权重")
    d: float = Field(..., ge=0.0, le=1.0, description="Φ− 权重")

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def validate_sum(self) -> "BellDiagonalState":
        total = self.a + self.b + self.c + self.d
        if abs(total - 1.0) > _SUM_TOL:
            raise ValueError(f"Bell 系数之和为 {total!r}，应为 1")
        return self

    @property
    def fidelity(self) -> float:
        return self.a

    @property
    def coefficients(self) -> Tuple[float, float, float, float]:
        return self.a, self.b, self.c, self.d

    @classmethod
    def of(cls, coefficients) -> "BellDiagonalState":
        a, b, c, d = (float(x) for x in coefficients)
        return cls(a=a, b=b, c=c, d=d)

    @classmethod
    def from_density(cls, rho: DensityOperator) -> "BellDiagonalState":
        """取 ρ 在 Bell 基下的对角元（非对角相干被丢弃）"""
        coeffs = np.clip(bell_coefficients(rho), 0.0, 1.0)
        return cls.of(coeffs / coeffs.sum())

    def to_density(self, space: Optional[HilbertSpace] = None) -> DensityOperator:
        space = space or HilbertSpace.qubits(2)
        basis = bell_basis(space)
        weights = np.array(self.coefficients)
        return DensityOperator.from_matrix(space, (basis * weights) @ basis.conj().T)


class PairSource(BaseModel):
    """纠缠对来源：|Ψ+⟩ 框架下的归一化两比特态与成功概率"""

    state: DensityOperator
    p_suc: float = Field(..., ge=0.0, le=1.0)

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def validate_state(self) -> "PairSource":
        if self.state.space.factors != (2, 2):
            raise ValueError("纯化需要两比特态")
        if not self.state.normalized:
            raise ValueError("纯化输入必须归一化")
        return self


class PurificationPlan(BaseModel):
    """J 轮递归纯化的结果"""

    steps: int = Field(..., ge=0, description="纯化轮数 J")
    n_pairs: int = Field(..., ge=1, description="消耗的初始纠缠对数 2^J")
    step_probabilities: List[float] = Field(default_factory=list, description="N_0..N_{J−1}")
    rotations: List[LocalRotation] = Field(default_factory=list, description="每轮实际使用的旋转")
    p_pur: float = Field(..., ge=0.0, le=1.0, description="纯化整体成功概率")
    p_total: float = Field(..., ge=0.0, le=1.0, description="P_pur = P_suc·p_pur/2^J")
    fidelity: float = Field(..., ge=0.0, le=1.0, description="F_pur（|Ψ+⟩ 框架）")

    @model_validator(mode="after")
    def validate_plan(self) -> "PurificationPlan":
        if self.n_pairs != 2 ** self.steps:
            raise ValueError(f"n_pairs 应为 2^{self.steps}")
        if len(self.step_probabilities) != self.steps or len(self.rotations) != self.steps:
            raise ValueError("每轮需要一个成功概率与一个旋转")
        expected = 1.0
        for j, n in enumerate(self.step_probabilities, start=1):
            expected *= n ** (2 ** (self.steps - j))
        if abs(self.p_pur - expected) > _SUM_TOL:
            raise ValueError(f"p_pur {self.p_pur!r} 与各轮概率乘积 {expected!r} 不一致")
        return self


class RegionPoint(BaseModel):
    """区域图中的一个参数点"""

    p1: float
    eta: float
    steps: int = Field(..., ge=0)
    fidelity: float
    p_total: float
    fidelity_ok: bool = Field(..., description="F_pur > F_th")
    probability_ok: bool = Field(..., description="P_pur > η²/2")

    @computed_field
    @property
    def inside(self) -> bool:
        return self.fidelity_ok and self.probability_ok

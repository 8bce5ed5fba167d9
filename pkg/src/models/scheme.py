"""
协议参数与效率指标的数据模型

时间以各协议的基准速率为单位（Γ_eg、κ 或 Γ），默认基准速率为 1。
"""
import math
from enum import Enum
from typing import Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

_TRIPLE_TOL = 1e-12


class SchemeId(str, Enum):
    """协议编号"""

    ONE_PHOTON_CW = "1cw"  # 连续驱动自发 Raman 散射，单光子
    ONE_PHOTON_PULSED = "1pls"  # 腔内脉冲 Raman 转移，单光子
    TWO_PHOTON = "2ph"  # 双光子符合探测


class BellSubset(str, Enum):
    """双光子方案计入的 Bell 结果"""

    HALF = "half"  # Ψ+ 与 Ψ− 都计入，因子 1/2
    QUARTER = "quarter"  # 只计入单一 Bell 态，因子 1/4

    @property
    def factor(self) -> float:
        return 0.5 if self is BellSubset.HALF else 0.25


class _Params(BaseModel):
    eta: float = Field(..., ge=0.0, le=1.0, description="探测效率 η = χ·η_d")

    model_config = ConfigDict(extra="ignore", frozen=True)


class SchemeParams1cw(_Params):
    """连续驱动单光子方案"""

    gamma_eg: float = Field(default=1.0, gt=0.0, description="自发 Raman 速率 Γ_eg")
    t_cw: Optional[float] = Field(None, ge=0.0, description="探测窗口 T_cw")
    p1: Optional[float] = Field(None, ge=0.0, le=1.0, description="单原子发射概率（给定时优先）")

    @model_validator(mode="after")
    def validate_window(self) -> "SchemeParams1cw":
        if self.p1 is None and self.t_cw is None:
            raise ValueError("1cw 需要 p1 或 t_cw")
        return self

    @property
    def emission_probability(self) -> float:
        if self.p1 is not None:
            return self.p1
        return -math.expm1(-self.gamma_eg * self.t_cw)

    @property
    def window(self) -> float:
        """探测窗口（由 p1 反推时可能为 inf）"""
        if self.t_cw is not None and self.p1 is None:
            return self.t_cw
        p = self.emission_probability
        return math.inf if p >= 1.0 else -math.log1p(-p) / self.gamma_eg


class SchemeParams1pls(_Params):
    """腔内脉冲单光子方案"""

    eps2: float = Field(..., ge=0.0, le=1.0, description="Raman 转移概率 |ε|²")
    kappa: float = Field(default=1.0, gt=0.0, description="腔衰减常数 κ")
    t: Optional[float] = Field(None, ge=0.0, description="探测窗口 T，可为 inf")
    p_cav: Optional[float] = Field(None, ge=0.0, le=1.0, description="单侧光子泄漏概率（给定时反推 T）")

    @model_validator(mode="after")
    def validate_window(self) -> "SchemeParams1pls":
        if self.p_cav is None and self.t is None:
            raise ValueError("1pls 需要 p_cav 或 t")
        if self.p_cav is not None and self.p_cav > self.eps2 + _TRIPLE_TOL:
            raise ValueError("p_cav 不能超过 eps2")
        return self

    @property
    def leak_probability(self) -> float:
        if self.p_cav is not None:
            return self.p_cav
        if math.isinf(self.t):
            return self.eps2
        return self.eps2 * -math.expm1(-self.kappa * self.t)

    @property
    def window(self) -> float:
        if self.p_cav is None:
            return self.t
        if self.eps2 == 0.0 or self.p_cav >= self.eps2:
            return math.inf if self.p_cav > 0.0 else 0.0
        return -math.log1p(-self.p_cav / self.eps2) / self.kappa


class SchemeParams2ph(_Params):
    """双光子方案"""

    gamma: float = Field(default=1.0, gt=0.0, description="总衰减速率 Γ（每个通道 Γ/2）")
    t: Optional[float] = Field(None, ge=0.0, description="探测窗口 T")
    p2: Optional[float] = Field(None, ge=0.0, le=1.0, description="单原子发射概率（给定时优先）")
    bell_subset: BellSubset = Field(default=BellSubset.HALF, description="计入的 Bell 结果")
    measured_fidelity: Optional[float] = Field(None, ge=0.0, le=1.0, description="实验测得保真度（仅用于基准报告）")

    @model_validator(mode="after")
    def validate_window(self) -> "SchemeParams2ph":
        if self.p2 is None and self.t is None:
            raise ValueError("2ph 需要 p2 或 t")
        return self

    @property
    def emission_probability(self) -> float:
        if self.p2 is not None:
            return self.p2
        return -math.expm1(-self.gamma * self.t)

    @property
    def window(self) -> float:
        if self.t is not None and self.p2 is None:
            return self.t
        p = self.emission_probability
        return math.inf if p >= 1.0 else -math.log1p(-p) / self.gamma


SchemeParams = Union[SchemeParams1cw, SchemeParams1pls, SchemeParams2ph]


class EfficiencyTriple(BaseModel):
    """成功概率、条件保真度、平均保真度"""

    p_suc: float = Field(..., ge=0.0, le=1.0, description="成功概率 P_suc")
    fidelity: float = Field(..., ge=0.0, le=1.0, description="条件保真度 F")
    avg_fidelity: float = Field(..., ge=0.0, le=1.0, description="平均保真度 F̄ = P_suc·F")

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def validate_product(self) -> "EfficiencyTriple":
        if abs(self.avg_fidelity - self.p_suc * self.fidelity) > _TRIPLE_TOL:
            raise ValueError(
                f"avg_fidelity {self.avg_fidelity!r} != p_suc*fidelity {self.p_suc * self.fidelity!r}"
            )
        return self

    @classmethod
    def of(cls, p_suc: float, fidelity: float) -> "EfficiencyTriple":
        return cls(p_suc=p_suc, fidelity=fidelity, avg_fidelity=p_suc * fidelity)


class RamanRateParams(BaseModel):
    """远失谐 Raman 驱动的速率参数（同一角频率约定）"""

    omega_er: float = Field(..., ge=0.0, description="驱动 Rabi 频率 Ω_er")
    gamma_r: float = Field(..., ge=0.0, description="|r⟩ 总衰减速率 Γ_r")
    gamma_rg: float = Field(..., ge=0.0, description="|r⟩→|g⟩ 分支速率")
    gamma_rd: float = Field(..., ge=0.0, description="|r⟩→D 态泄漏速率")

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def validate_branches(self) -> "RamanRateParams":
        if self.gamma_rg + self.gamma_rd > self.gamma_r * (1.0 + _TRIPLE_TOL):
            raise ValueError("Γ_rg + Γ_rD 不能超过 Γ_r")
        return self

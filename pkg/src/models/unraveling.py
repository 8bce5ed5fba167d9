"""
跃迁通道、探测端口与展开结果的数据模型
"""
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.models.quantum import DensityOperator, HilbertSpace, Operator, Superoperator
from src.models.scheme import SchemeId


class PortSign(str, Enum):
    PLUS = "+"
    MINUS = "-"


class JumpChannel(BaseModel):
    """单个发射体的发射通道 A^(j)_ξ"""

    emitter: int = Field(..., ge=1, le=2, description="发射体编号")
    label: str = Field(default="", description="通道/偏振标签 ξ")
    operator: Operator = Field(..., description="降算符 A")
    rate: float = Field(..., gt=0.0, description="发射速率 2R")
    detected: bool = Field(default=True, description="False 表示该通道不进入探测器（如回泵）")

    model_config = ConfigDict(frozen=True)

    @property
    def space(self) -> HilbertSpace:
        return self.operator.space


class DetectorPort(BaseModel):
    """分束器输出端口 d±ξ = (A^(1)_ξ ± A^(2)_ξ)/√2"""

    sign: PortSign
    label: str = Field(default="", description="通道/偏振标签 ξ")
    operator: Operator
    rate: float = Field(..., gt=0.0, description="对应通道的发射速率 2R")
    eta: float = Field(..., ge=0.0, le=1.0, description="探测效率")

    model_config = ConfigDict(frozen=True)

    @property
    def port_id(self) -> str:
        return f"D{self.sign.value}{self.label}"


class SuperoperatorBundle(BaseModel):
    """阻尼 L、跃迁 J、点击 C、各端口点击以及无点击生成元"""

    space: HilbertSpace
    eta: float
    damping: Superoperator = Field(..., description="L")
    jump: Superoperator = Field(..., description="J（所有通道）")
    click: Superoperator = Field(..., description="C = Σ Cport")
    port_clicks: Dict[str, Superoperator] = Field(..., description="端口 id -> Cport")
    ports: Dict[str, DetectorPort]
    no_click_generator: Superoperator = Field(..., description="L + J − C")
    channels: Tuple[JumpChannel, ...]

    model_config = ConfigDict(frozen=True)

    def port(self, port_id: str) -> DetectorPort:
        if port_id not in self.ports:
            raise ValueError(f"未知端口: {port_id}，可选 {sorted(self.ports)}")
        return self.ports[port_id]

    def port_click(self, port_id: str) -> Superoperator:
        self.port(port_id)
        return self.port_clicks[port_id]


class ClickRecord(BaseModel):
    """一条轨迹上的点击记录"""

    window: float = Field(..., ge=0.0)
    events: List[Tuple[float, str]] = Field(default_factory=list, description="(时刻, 端口 id)")

    @model_validator(mode="after")
    def validate_events(self) -> "ClickRecord":
        last = -np.inf
        for time, _ in self.events:
            if not 0.0 <= time <= self.window:
                raise ValueError(f"点击时刻 {time} 超出窗口 [0, {self.window}]")
            if time <= last:
                raise ValueError("点击时刻必须严格递增")
            last = time
        return self

    @property
    def pattern(self) -> str:
        return ",".join(port for _, port in self.events)


class ProtocolModel(BaseModel):
    """可交给展开引擎的协议模型"""

    scheme: SchemeId
    space: HilbertSpace
    rho0: DensityOperator
    channels: Tuple[JumpChannel, ...]
    ports: Tuple[DetectorPort, ...]
    window: float = Field(..., ge=0.0, description="探测窗口（基准速率单位）")
    emitter_factors: Tuple[int, ...] = Field(..., description="原子所在因子下标")
    target: DensityOperator = Field(..., description="原子因子上的目标 Bell 态")

    model_config = ConfigDict(frozen=True)


class ScenarioProbabilities(BaseModel):
    """0/1/2 次点击的概率"""

    p0: float
    p1: float
    p2: float

    @property
    def completeness(self) -> float:
        return self.p0 + self.p1 + self.p2


class ConditionalState(BaseModel):
    """条件态及其事件概率"""

    probability: float = Field(..., ge=0.0)
    state: DensityOperator
    ports: Tuple[str, ...]

    model_config = ConfigDict(frozen=True)


class MonteCarloResult(BaseModel):
    """量子跳跃采样结果"""

    n_traj: int
    seed: int
    window: float
    eta: float
    counts: Dict[int, int] = Field(..., description="点击次数 -> 轨迹数")
    port_counts: Dict[str, int] = Field(..., description="端口 -> 点击总数")
    pattern_counts: Dict[str, int] = Field(..., description="点击模式 -> 轨迹数")
    conditional_states: Dict[str, DensityOperator] = Field(default_factory=dict, description="点击模式 -> 平均条件态")

    model_config = ConfigDict(arbitrary_types_allowed=True)

    def probability(self, clicks: int) -> float:
        return self.counts.get(clicks, 0) / self.n_traj

    def stderr(self, clicks: int) -> float:
        p = self.probability(clicks)
        return float(np.sqrt(max(p * (1.0 - p), 0.0) / self.n_traj))

    @property
    def p0(self) -> float:
        return self.probability(0)

    @property
    def p1(self) -> float:
        return self.probability(1)

    @property
    def p2(self) -> float:
        return self.probability(2)

    def summary(self) -> Dict[str, Optional[float]]:
        return {
            "n_traj": self.n_traj,
            "seed": self.seed,
            "p0": self.p0,
            "p1": self.p1,
            "p2": self.p2,
            "p1_stderr": self.stderr(1),
            "p2_stderr": self.stderr(2),
            **{f"clicks_{port}": count for port, count in sorted(self.port_counts.items())},
        }

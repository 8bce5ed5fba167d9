"""
扫描、区域图、基准与运行记录的数据模型
"""
from datetime import datetime
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from src.models.scheme import BellSubset, EfficiencyTriple, SchemeId

# 各协议可扫描的参数
SWEEP_PARAMETERS: Dict[SchemeId, Tuple[str, ...]] = {
    SchemeId.ONE_PHOTON_CW: ("t", "p1", "eta"),
    SchemeId.ONE_PHOTON_PULSED: ("t", "eps2", "eta"),
    SchemeId.TWO_PHOTON: ("t", "p2", "eta"),
}


class SweepSpec(BaseModel):
    """一维参数扫描"""

    scheme: SchemeId
    parameter: str = Field(..., description="扫描参数")
    start: float
    stop: float
    steps: int = Field(..., ge=2, description="网格点数（含端点）")
    fixed: Dict[str, Any] = Field(default_factory=dict, description="其余固定参数")
    engine: bool = Field(default=False, description="同时输出引擎结果列")
    label: Optional[str] = Field(None, description="曲线标签")

    @model_validator(mode="after")
    def validate_parameter(self) -> "SweepSpec":
        allowed = SWEEP_PARAMETERS[self.scheme]
        if self.parameter not in allowed:
            raise ValueError(f"{self.scheme.value} 只能扫描 {allowed}，实际 {self.parameter}")
        if self.parameter in self.fixed:
            raise ValueError(f"参数 {self.parameter} 同时出现在 fixed 中")
        if self.parameter != "t" and not (0.0 <= self.start <= 1.0 and 0.0 <= self.stop <= 1.0):
            raise ValueError(f"{self.parameter} 的范围必须在 [0, 1] 内")
        if self.parameter == "t" and min(self.start, self.stop) < 0.0:
            raise ValueError("时间不能为负")
        return self


class RegionSpec(BaseModel):
    """(p1, η) 平面上的区域图"""

    p1_range: Tuple[float, float] = Field(default=(0.0, 1.0))
    eta_range: Tuple[float, float] = Field(default=(0.0, 1.0))
    resolution: int = Field(default=200, ge=2, description="每个方向的网格点数")
    f_th: float = Field(..., gt=0.0, lt=1.0, description="保真度阈值")
    steps_list: List[int] = Field(default_factory=lambda: [0], description="纯化轮数叠加")

    @field_validator("p1_range", "eta_range")
    @classmethod
    def _check_range(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        lo, hi = value
        if not 0.0 <= lo <= hi <= 1.0:
            raise ValueError(f"范围必须为 [0, 1] 的子区间: {value}")
        return value

    @field_validator("steps_list")
    @classmethod
    def _check_steps(cls, value: List[int]) -> List[int]:
        if not value or min(value) < 0:
            raise ValueError("steps_list 需要非空的非负整数")
        return sorted(set(value))


class PublishedValue(BaseModel):
    """文献给出的数值及其有效数字位数"""

    value: float = Field(..., gt=0.0)
    digits: int = Field(default=2, ge=1)


class BenchmarkPreset(BaseModel):
    """实验基准参数"""

    name: str
    scheme: SchemeId
    description: str = ""
    params: Dict[str, Any] = Field(..., description="协议参数")
    sequence_rate: float = Field(..., gt=0.0, description="实验序列重复率 (1/s)")
    bell_subset: Optional[BellSubset] = None
    published: Dict[str, PublishedValue] = Field(
        default_factory=dict, description="p_suc / fidelity / avg_fidelity / seconds_per_event 的文献值"
    )


class BenchmarkResult(BaseModel):
    preset: str
    scheme: SchemeId
    triple: EfficiencyTriple
    sequence_rate: float
    events_per_second: float
    seconds_per_event: float
    deviations: Dict[str, float] = Field(default_factory=dict, description="相对文献值的相对偏差")
    passed: bool = True


class CheckReport(BaseModel):
    """自检套件结果"""

    suite: str
    passed: bool
    max_deviation: float
    tolerance: float
    details: List[Dict[str, Any]] = Field(default_factory=list)


class RunManifest(BaseModel):
    """与每个输出数据文件同目录的运行记录"""

    tool: str = "rae"
    version: str
    run_id: str
    command: str
    scheme: Optional[str] = None
    parameters: Dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = None
    started_at: datetime
    finished_at: Optional[datetime] = None
    output_file: str
    output_digest: Optional[str] = Field(None, description="数据文件的 sha256")
    parameters_digest: Optional[str] = Field(None, description="参数指纹")
    environment: Dict[str, Any] = Field(default_factory=dict)

"""
配置管理模块

从 config.yml 加载配置，环境变量 RAE_OUTPUT_DIR 覆盖默认输出目录
"""
import os
from pathlib import Path

import yaml
from pydantic import BaseModel, Field, ValidationError, field_validator

CONFIG_FILE = Path(os.environ.get("RAE_CONFIG_FILE", Path(__file__).resolve().parent.parent / "config.yml"))

OUTPUT_DIR_ENV = "RAE_OUTPUT_DIR"


class Settings(BaseModel):
    # 结果存储
    output_dir: Path = Path("./data/results")

    # 日志配置
    log_level: str = "info"

    # 数值容差
    structural_tol: float = Field(default=1e-10, gt=0)  # 厄米性、正定性、迹
    engine_tol: float = Field(default=1e-8, gt=0)  # 引擎 vs 解析式
    benchmark_rtol: float = Field(default=1e-2, gt=0)  # 实验基准（两位有效数字）

    # Monte Carlo 默认参数
    mc_trajectories: int = Field(default=100_000, ge=1)
    mc_seed: int = Field(default=42, ge=0)
    mc_chunk_size: int = Field(default=1000, ge=1)  # 每个归约单元的轨迹数

    # 进程池大小，1 表示串行
    workers: int = Field(default=1, ge=1)

    # CSV 浮点格式（至少 12 位有效数字）
    csv_float_format: str = "%.15g"

    @field_validator("log_level")
    @classmethod
    def _check_level(cls, value: str) -> str:
        value = value.lower()
        if value not in {"debug", "info", "warning", "error"}:
            raise ValueError(f"unsupported log_level: {value}")
        return value

    def resolve_output_dir(self) -> Path:
        """获取输出目录（环境变量优先）"""
        override = os.environ.get(OUTPUT_DIR_ENV)
        return Path(override) if override else self.output_dir


def load_settings() -> Settings:
    if not CONFIG_FILE.is_file():
        raise FileNotFoundError(f"Config file not found: {CONFIG_FILE}")
    with CONFIG_FILE.open("r", encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}
    try:
        return Settings(**data)
    except ValidationError as exc:
        raise ValueError(f"Invalid config.yml: {exc}") from exc


# 全局配置实例
settings = load_settings()

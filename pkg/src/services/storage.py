"""
结果存储服务

负责输出数据（CSV / JSON）及其运行记录的持久化（使用文件系统 + JSON）
"""
import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional

import pandas as pd
from nanoid import generate
from pydantic import BaseModel

from src import __version__
from src.config import settings
from src.models.run import RunManifest
from src.utils.digest import file_digest, fingerprint
from src.utils.system_info import get_env_info

logger = logging.getLogger(__name__)

MANIFEST_SUFFIX = ".manifest.json"


def manifest_path_for(data_path: Path) -> Path:
    """数据文件旁的运行记录路径 <stem>.manifest.json"""
    return data_path.with_name(f"{data_path.stem}{MANIFEST_SUFFIX}")


class ResultStorage:
    """结果存储服务"""

    def __init__(self, root_dir: Optional[Path] = None):
        """
        初始化结果存储服务

        Args:
            root_dir: 输出根目录，默认使用配置（环境变量 RAE_OUTPUT_DIR 优先）
        """
        self.root_dir = Path(root_dir or settings.resolve_output_dir()).resolve()

    def generate_run_id(self) -> str:
        """
        生成唯一的运行 ID

        Returns:
            12 字符的 nanoid
        """
        return generate(size=12)

    def target(self, filename: str, run_id: str, out: Optional[Path] = None) -> Path:
        """
        确定输出文件路径：显式 --out 优先，否则 <root>/<run_id>/<filename>
        """
        path = Path(out) if out else self.root_dir / run_id / filename
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def save_frame(
        self,
        frame: pd.DataFrame,
        filename: str,
        command: str,
        parameters: Dict[str, Any],
        started_at: datetime,
        out: Optional[Path] = None,
        scheme: Optional[str] = None,
        seed: Optional[int] = None,
    ) -> Path:
        """
        保存表格数据为 CSV（UTF-8，逗号分隔，LF 换行）并写入运行记录

        Returns:
            数据文件路径
        """
        run_id = self.generate_run_id()
        path = self.target(filename, run_id, out)
        frame.to_csv(path, index=False, float_format=settings.csv_float_format, lineterminator="\n", encoding="utf-8")
        self._save_manifest(path, run_id, command, parameters, started_at, scheme, seed)
        logger.info(f"wrote {len(frame)} rows to {path}")
        return path

    def save_json(
        self,
        payload: Any,
        filename: str,
        command: str,
        parameters: Dict[str, Any],
        started_at: datetime,
        out: Optional[Path] = None,
        scheme: Optional[str] = None,
        seed: Optional[int] = None,
    ) -> Path:
        """
        保存结果对象为 JSON 并写入运行记录

        Returns:
            数据文件路径
        """
        run_id = self.generate_run_id()
        path = self.target(filename, run_id, out)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(to_jsonable(payload), f, ensure_ascii=False, indent=2)
        self._save_manifest(path, run_id, command, parameters, started_at, scheme, seed)
        logger.info(f"wrote {path}")
        return path

    def load_manifest(self, data_path: Path) -> Optional[RunManifest]:
        """
        读取数据文件对应的运行记录

        Returns:
            RunManifest，如果不存在则返回 None
        """
        path = manifest_path_for(Path(data_path))
        if not path.exists():
            return None
        with open(path, "r", encoding="utf-8") as f:
            return RunManifest(**json.load(f))

    def _save_manifest(
        self,
        data_path: Path,
        run_id: str,
        command: str,
        parameters: Dict[str, Any],
        started_at: datetime,
        scheme: Optional[str],
        seed: Optional[int],
    ) -> None:
        manifest = RunManifest(
            version=__version__,
            run_id=run_id,
            command=command,
            scheme=scheme,
            parameters=to_jsonable(parameters),
            seed=seed,
            started_at=started_at,
            finished_at=datetime.now(),
            output_file=data_path.name,
            output_digest=file_digest(data_path),
            parameters_digest=fingerprint(to_jsonable(parameters)),
            environment=get_env_info(),
        )
        with open(manifest_path_for(data_path), "w", encoding="utf-8", newline="\n") as f:
            json.dump(manifest.model_dump(mode="json"), f, ensure_ascii=False, indent=2)


def to_jsonable(value: Any) -> Any:
    """pydantic 模型、numpy 标量、Path 等转换为 JSON 可序列化对象"""
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json")
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    if hasattr(value, "item") and callable(value.item):
        return value.item()
    return value

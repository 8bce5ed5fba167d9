"""
参数指纹与文件摘要
"""
import hashlib
import json
from pathlib import Path
from typing import Any, Mapping


def fingerprint(parameters: Mapping[str, Any]) -> str:
    """
    运行参数的指纹（键排序后的 JSON 的 sha256）

    Args:
        parameters: 可 JSON 序列化的参数字典

    Returns:
        十六进制摘要
    """
    payload = json.dumps(parameters, sort_keys=True, ensure_ascii=False, default=str)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def file_digest(path: Path, chunk_size: int = 1 << 16) -> str:
    """文件内容的 sha256"""
    sha = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(chunk_size), b""):
            sha.update(block)
    return sha.hexdigest()

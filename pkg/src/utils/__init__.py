"""通用工具函数导出"""
from .digest import file_digest, fingerprint
from .system_info import get_env_info

__all__ = [
    "file_digest",
    "fingerprint",
    "get_env_info",
]

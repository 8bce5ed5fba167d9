"""
Services module

提供展开引擎、协议、纯化、扫描与存储服务
"""
from .storage import ResultStorage

__all__ = [
    "ResultStorage",
]

"""
运行环境信息采集

写入每个输出文件的运行记录，便于复现数值结果。
"""
import platform
import sys
from datetime import datetime
from typing import Any, Dict

import numpy as np
import pandas as pd
import psutil
import scipy


def get_cpu_brand() -> str:
    """跨平台获取 CPU 型号名称"""
    if platform.system() == "Linux":
        try:
            with open("/proc/cpuinfo", "r") as f:
                for line in f:
                    if line.startswith("model name"):
                        return line.split(":")[1].strip()
        except Exception:
            pass
    return platform.processor() or "Unknown"


def get_env_info() -> Dict[str, Any]:
    """
    获取运行环境信息

    Returns:
        包含以下字段的字典：
        - collected_at: 采集时间
        - python, numpy, scipy, pandas: 解释器与数值库版本
        - os, os_full: 操作系统信息
        - cpu_arch, cpu_model, cpu_log_cores: CPU 信息
        - mem_total_gb: 内存总量（GB）
        - hostname: 主机名
    """
    info: Dict[str, Any] = {
        "collected_at": datetime.now().strftime("%Y-%m-%d %H:%M:%S"),
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
    }
    try:
        info["os"] = platform.system()
        info["os_full"] = platform.platform()
        info["cpu_arch"] = platform.machine()
        info["cpu_model"] = get_cpu_brand()
        info["cpu_log_cores"] = psutil.cpu_count(logical=True) or 0
        info["mem_total_gb"] = round(psutil.virtual_memory().total / (1024 ** 3), 2)
        info["hostname"] = platform.node()
    except Exception:
        pass
    return info

"""
rae: 远程原子纠缠协议效率分析
"""
__version__ = "0.1.0"

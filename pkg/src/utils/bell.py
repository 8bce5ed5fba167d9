"""
Bell 态工具

系数顺序固定为 (Φ+, Ψ−, Ψ+, Φ−)：
Φ± = (|00⟩ ± |11⟩)/√2，Ψ± = (|01⟩ ± |10⟩)/√2。
原子基矢映射为 |e⟩ -> |0⟩，|g⟩ -> |1⟩。
"""
from typing import Dict, Tuple

import numpy as np

from src.models.quantum import DensityOperator, HilbertSpace

BELL_ORDER: Tuple[str, ...] = ("phi_plus", "psi_minus", "psi_plus", "phi_minus")

_SQRT_HALF = 1.0 / np.sqrt(2.0)


def bell_ket(name: str, space: HilbertSpace, zero: str = "0", one: str = "1") -> np.ndarray:
    """
    两体 Bell 态矢量

    Args:
        name: BELL_ORDER 中的名称
        space: 两因子空间（可为三能级原子，只用 zero/one 两个标签）
        zero, one: 充当 |0⟩、|1⟩ 的基矢标签
    """
    if len(space.factors) != 2:
        raise ValueError("Bell 态需要两因子空间")
    k00, k01 = space.ket(zero, zero), space.ket(zero, one)
    k10, k11 = space.ket(one, zero), space.ket(one, one)
    kets: Dict[str, np.ndarray] = {
        "phi_plus": k00 + k11,
        "phi_minus": k00 - k11,
        "psi_plus": k01 + k10,
        "psi_minus": k01 - k10,
    }
    if name not in kets:
        raise ValueError(f"未知 Bell 态: {name}")
    return _SQRT_HALF * kets[name]


def bell_state(name: str, space: HilbertSpace, zero: str = "0", one: str = "1") -> DensityOperator:
    return DensityOperator.from_ket(space, bell_ket(name, space, zero, one))


def bell_basis(space: HilbertSpace) -> np.ndarray:
    """列为 BELL_ORDER 顺序的 Bell 基矢 (4×4)"""
    return np.column_stack([bell_ket(name, space) for name in BELL_ORDER])


def bell_coefficients(rho: DensityOperator) -> np.ndarray:
    """ρ 在 Bell 基下的对角元"""
    basis = bell_basis(rho.space)
    diag = np.einsum("ia,ij,ja->a", basis.conj(), rho.matrix, basis)
    return np.real(diag)


def werner(fid: float, space: HilbertSpace) -> DensityOperator:
    """Φ+ 保真度为 fid 的 Werner 态"""
    basis = bell_basis(space)
    weights = np.array([fid] + [(1.0 - fid) / 3.0] * 3)
    return DensityOperator.from_matrix(space, (basis * weights) @ basis.conj().T)

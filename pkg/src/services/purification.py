"""
递归纠缠纯化

双边局部旋转 + 双边 CNOT + 目标对 Z 基测量，保留一致结果（00 或 11）。
两对的比特顺序为 (A1, B1, A2, B2)，第一对为控制对。
"""
import logging
import math
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.models.errors import NullEventError
from src.models.purification import (
    BellDiagonalState,
    LocalRotation,
    PairSource,
    PurificationPlan,
    RegionPoint,
)
from src.models.quantum import DensityOperator, HilbertSpace
from src.models.scheme import SchemeParams1cw
from src.services.protocols import build_model, engine_triple, eval_1cw
from src.services.unraveling import build_bundle, conditional_state_one_click
from src.utils.bell import bell_state
from src.utils.quantum import fidelity, partial_trace

logger = logging.getLogger(__name__)

NULL_EVENT_FLOOR = 1e-15
# 自适应选择时视为相等的 Φ+ 权重差
TIE_TOL = 1e-12

PAIR = HilbertSpace.qubits(2)
TWO_PAIRS = HilbertSpace.qubits(4)

_I2 = np.eye(2, dtype=np.complex128)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)


@lru_cache(maxsize=None)
def _local_pair(rotation: LocalRotation) -> np.ndarray:
    """Alice (I − iσ)/√2，Bob (I + iσ)/√2"""
    sigma = _X if rotation is LocalRotation.X else _Z
    alice = (_I2 - 1j * sigma) / math.sqrt(2.0)
    bob = (_I2 + 1j * sigma) / math.sqrt(2.0)
    return np.kron(alice, bob)


def _cnot(control: int, target: int, n: int = 4) -> np.ndarray:
    dim = 2 ** n
    out = np.zeros((dim, dim), dtype=np.complex128)
    for i in range(dim):
        bits = [(i >> (n - 1 - k)) & 1 for k in range(n)]
        if bits[control]:
            bits[target] ^= 1
        j = int("".join(map(str, bits)), 2)
        out[j, i] = 1.0
    return out


@lru_cache(maxsize=None)
def _step_operator(rotation: LocalRotation) -> np.ndarray:
    """旋转两对后做双边 CNOT（A1→A2，B1→B2）"""
    local = _local_pair(rotation)
    return _cnot(0, 2) @ _cnot(1, 3) @ np.kron(local, local)


@lru_cache(maxsize=None)
def _coincidence_projector() -> np.ndarray:
    keep = np.zeros((4, 4), dtype=np.complex128)
    keep[0, 0] = keep[3, 3] = 1.0
    return np.kron(np.eye(4, dtype=np.complex128), keep)


def _as_pair(rho: DensityOperator) -> DensityOperator:
    if rho.space.factors != (2, 2):
        raise ValueError(f"需要两比特态，实际因子 {rho.space.factors}")
    if rho.space != PAIR:
        rho = DensityOperator(space=PAIR, matrix=rho.matrix, normalized=rho.normalized)
    return rho if rho.normalized else rho.normalize()


def _oracle(rho: DensityOperator, rotation: LocalRotation) -> Tuple[float, DensityOperator]:
    rho = _as_pair(rho)
    u = _step_operator(rotation)
    p = _coincidence_projector()
    joint = np.kron(rho.matrix, rho.matrix)
    kept = p @ u @ joint @ u.conj().T @ p
    n = float(np.real(np.trace(kept)))
    if n < NULL_EVENT_FLOOR:
        raise NullEventError("purification coincidence", n)
    survivor = partial_trace(DensityOperator.from_matrix(TWO_PAIRS, kept, normalize=True), [0, 1])
    return min(n, 1.0), DensityOperator.from_matrix(PAIR, survivor.matrix, normalize=True)


def _phi_plus_weight(rho: DensityOperator) -> float:
    return fidelity(bell_state("phi_plus", PAIR), rho)


def oracle_step(
    rho: DensityOperator, rotation: Union[LocalRotation, str] = LocalRotation.ADAPTIVE
) -> Tuple[float, DensityOperator, LocalRotation]:
    """
    在两份相同的 ρ 上做一轮纯化（16×16 直接模拟）

    Returns:
        (成功概率 N, 归一化的保留对, 实际使用的旋转)

    Raises:
        NullEventError: N 低于 1e-15
    """
    rotation = LocalRotation(rotation)
    if rotation is not LocalRotation.ADAPTIVE:
        n, out = _oracle(rho, rotation)
        return n, out, rotation
    n_x, out_x = _oracle(rho, LocalRotation.X)
    n_z, out_z = _oracle(rho, LocalRotation.Z)
    if _phi_plus_weight(out_z) > _phi_plus_weight(out_x) + TIE_TOL:
        return n_z, out_z, LocalRotation.Z
    return n_x, out_x, LocalRotation.X


def recurrence_step(
    state: BellDiagonalState, rotation: Union[LocalRotation, str] = LocalRotation.X
) -> Tuple[float, BellDiagonalState]:
    """
    Bell 对角态的系数递推

    Returns:
        (成功概率 N, 新的 Bell 对角态)
    """
    rotation = LocalRotation(rotation)
    a, b, c, d = state.coefficients
    if rotation is LocalRotation.ADAPTIVE:
        n_x, out_x = recurrence_step(state, LocalRotation.X)
        n_z, out_z = recurrence_step(state, LocalRotation.Z)
        return (n_z, out_z) if out_z.a > out_x.a + TIE_TOL else (n_x, out_x)
    if rotation is LocalRotation.X:
        n = (a + b) ** 2 + (c + d) ** 2
        coeffs = (a * a + b * b, 2 * c * d, c * c + d * d, 2 * a * b)
    else:
        n = (a + d) ** 2 + (b + c) ** 2
        coeffs = (a * a + d * d, 2 * b * c, b * b + c * c, 2 * a * d)
    if n < NULL_EVENT_FLOOR:
        raise NullEventError("purification coincidence", n)
    coeffs = np.array(coeffs) / n
    return n, BellDiagonalState.of(coeffs / coeffs.sum())


def bell_frame_rotation(rho: DensityOperator, direction: int = 1) -> DensityOperator:
    """
    第二个比特上的 σx，在 |Ψ+⟩ 与 |Φ+⟩ 框架之间切换（自逆，direction 只作记录）
    """
    if direction not in (1, -1):
        raise ValueError(f"direction 必须为 ±1: {direction}")
    if rho.space.factors != (2, 2):
        raise ValueError(f"需要两比特态，实际因子 {rho.space.factors}")
    flip = np.kron(_I2, _X)
    return DensityOperator(space=rho.space, matrix=flip @ rho.matrix @ flip, normalized=rho.normalized)


def run_plan(
    source: PairSource, steps: int, rotation: Union[LocalRotation, str] = LocalRotation.ADAPTIVE
) -> PurificationPlan:
    """
    从 2^J 份相同的纠缠对出发做 J 轮递归纯化

    p_pur = Π_j N_{j−1}^{2^{J−j}}，P_pur = P_suc·p_pur/2^J，F_pur 在 |Ψ+⟩ 框架下计算
    """
    if steps < 0:
        raise ValueError(f"steps 必须 >= 0: {steps}")
    rotation = LocalRotation(rotation)
    rho = bell_frame_rotation(_as_pair(source.state))
    probabilities: List[float] = []
    used: List[LocalRotation] = []
    for j in range(steps):
        n, rho, chosen = oracle_step(rho, rotation)
        probabilities.append(n)
        used.append(chosen)
        logger.debug(f"purification step {j + 1}: N={n:.12g}, rotation={chosen.value}")

    p_pur = 1.0
    for j, n in enumerate(probabilities, start=1):
        p_pur *= n ** (2 ** (steps - j))
    final = bell_frame_rotation(rho, -1)
    return PurificationPlan(
        steps=steps,
        n_pairs=2 ** steps,
        step_probabilities=probabilities,
        rotations=used,
        p_pur=p_pur,
        p_total=source.p_suc * p_pur / 2 ** steps,
        fidelity=fidelity(bell_state("psi_plus", PAIR), final),
    )


def pair_source_1cw(p1: float, eta: float, engine: bool = False) -> PairSource:
    """
    1cw 方案的纠缠对来源

    解析形式 ρ_M = F|Ψ+⟩⟨Ψ+| + (1−F)|g,g⟩⟨g,g|；engine=True 时取引擎在 D+ 端口的条件态。
    """
    params = SchemeParams1cw(p1=p1, eta=eta)
    if engine:
        model = build_model("1cw", params)
        cond = conditional_state_one_click(build_bundle(model.channels, model.ports), model.rho0, "D+", model.window)
        return PairSource(
            state=DensityOperator(space=PAIR, matrix=cond.state.matrix),
            p_suc=engine_triple(model).p_suc,
        )
    triple = eval_1cw(params)
    gg = np.zeros((4, 4), dtype=np.complex128)
    gg[3, 3] = 1.0
    matrix = triple.fidelity * bell_state("psi_plus", PAIR).matrix + (1.0 - triple.fidelity) * gg
    return PairSource(state=DensityOperator.from_matrix(PAIR, matrix), p_suc=triple.p_suc)


def steps_to_threshold(
    source: PairSource,
    f_th: float,
    max_steps: int = 10,
    rotation: Union[LocalRotation, str] = LocalRotation.ADAPTIVE,
) -> Optional[PurificationPlan]:
    """达到 F_pur > F_th 所需的最少轮数；max_steps 内达不到时返回 None"""
    if not 0.0 < f_th < 1.0:
        raise ValueError(f"f_th 超出 (0, 1): {f_th}")
    for j in range(max_steps + 1):
        plan = run_plan(source, j, rotation)
        if plan.fidelity > f_th:
            return plan
    return None


def purified_region(
    p1_grid: Sequence[float],
    eta_grid: Sequence[float],
    f_th: float,
    steps_list: Iterable[int],
    rotation: Union[LocalRotation, str] = LocalRotation.ADAPTIVE,
) -> List[RegionPoint]:
    """
    逐点判定 F_pur > F_th 与 P_pur > η²/2（严格不等）

    行顺序：η 外层、p1 内层、J 最内层。
    """
    if not 0.0 < f_th < 1.0:
        raise ValueError(f"f_th 超出 (0, 1): {f_th}")
    steps_list = sorted(set(int(j) for j in steps_list))
    if not steps_list or steps_list[0] < 0:
        raise ValueError("steps_list 需要非空的非负整数")
    top = steps_list[-1]
    points: List[RegionPoint] = []
    for eta in eta_grid:
        for p1 in p1_grid:
            source = pair_source_1cw(float(p1), float(eta))
            plans = _plans_up_to(source, top, rotation)
            for j in steps_list:
                fid, p_total = plans[j]
                points.append(
                    RegionPoint(
                        p1=float(p1),
                        eta=float(eta),
                        steps=j,
                        fidelity=fid,
                        p_total=p_total,
                        fidelity_ok=fid > f_th,
                        probability_ok=p_total > eta ** 2 / 2.0,
                    )
                )
    return points


def _plans_up_to(
    source: PairSource, top: int, rotation: Union[LocalRotation, str]
) -> List[Tuple[float, float]]:
    """一次迭代得到 J = 0..top 的 (F_pur, P_pur)"""
    rotation = LocalRotation(rotation)
    rho = bell_frame_rotation(source.state)
    target = bell_state("phi_plus", PAIR)
    out = [(fidelity(target, rho), source.p_suc)]
    probabilities: List[float] = []
    for steps in range(1, top + 1):
        try:
            n, rho, _ = oracle_step(rho, rotation)
        except NullEventError:
            out.extend([(0.0, 0.0)] * (top + 1 - steps))
            break
        probabilities.append(n)
        p_pur = 1.0
        for j, nj in enumerate(probabilities, start=1):
            p_pur *= nj ** (2 ** (steps - j))
        out.append((fidelity(target, rho), source.p_suc * p_pur / 2 ** steps))
    return out

"""
量子跳跃 Monte Carlo 采样

每条轨迹使用由主种子确定派生的独立随机子流 SeedSequence(seed, spawn_key=(i,))；
轨迹按固定大小分块，块内顺序累加、块间按下标顺序归约，结果与进程数无关。
"""
import logging
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.optimize  # type: ignore

from src.config import settings
from src.models.quantum import DensityOperator
from src.models.unraveling import ClickRecord, MonteCarloResult, SuperoperatorBundle

logger = logging.getLogger(__name__)

NO_CLICKS = "none"


@dataclass
class TrajectoryKernel:
    """单条轨迹采样所需的全部数值数据（可序列化给子进程）"""

    window: float
    eta: float
    # K = Σ R A†A 的本征分解，无跳跃演化为 e^{−Kτ}
    k_values: np.ndarray
    k_vectors: np.ndarray
    # 被探测通道按端口基展开：d, 速率, 端口 id
    port_ops: List[np.ndarray]
    port_rates: np.ndarray
    port_ids: List[str]
    # 不进入探测器的通道
    dark_ops: List[np.ndarray]
    dark_rates: np.ndarray
    # 初态的纯态分解
    init_weights: np.ndarray
    init_kets: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self) -> None:
        self.dim = self.k_vectors.shape[0]

    def evolve(self, psi: np.ndarray, tau: float) -> np.ndarray:
        c = self.k_vectors.conj().T @ psi
        return self.k_vectors @ (np.exp(-self.k_values * tau) * c)

    def survival(self, psi: np.ndarray):
        weights = np.abs(self.k_vectors.conj().T @ psi) ** 2
        rates = 2.0 * self.k_values
        return lambda tau: float(np.dot(weights, np.exp(-rates * tau)))


def build_kernel(bundle: SuperoperatorBundle, rho0: DensityOperator, t: float) -> TrajectoryKernel:
    """从超算符集合与初态构造采样核"""
    if t < 0 or not np.isfinite(t):
        raise ValueError(f"时间必须为非负有限值: {t}")
    d = bundle.space.dim
    k = np.zeros((d, d), dtype=np.complex128)
    for ch in bundle.channels:
        a = ch.operator.matrix
        k += 0.5 * ch.rate * (a.conj().T @ a)
    k_values, k_vectors = np.linalg.eigh(0.5 * (k + k.conj().T))
    k_values = np.clip(k_values, 0.0, None)

    ports = list(bundle.ports.values())
    dark = [ch for ch in bundle.channels if not ch.detected]

    rho_weights, rho_kets = np.linalg.eigh(rho0.matrix)
    keep = rho_weights > 1e-14
    weights = rho_weights[keep] / rho_weights[keep].sum()

    return TrajectoryKernel(
        window=float(t),
        eta=bundle.eta,
        k_values=k_values,
        k_vectors=k_vectors,
        port_ops=[np.asarray(p.operator.matrix) for p in ports],
        port_rates=np.array([p.rate for p in ports], dtype=float),
        port_ids=[p.port_id for p in ports],
        dark_ops=[np.asarray(ch.operator.matrix) for ch in dark],
        dark_rates=np.array([ch.rate for ch in dark], dtype=float),
        init_weights=weights,
        init_kets=rho_kets[:, keep],
    )


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def sample_trajectory(kernel: TrajectoryKernel, rng: np.random.Generator) -> Tuple[ClickRecord, np.ndarray]:
    """
    采样一条轨迹

    等待时间由无跳跃存活概率 ‖e^{−Kτ}ψ‖² 反演得到；每次跳跃以一次均匀抽样对 η 判定是否被探测，
    被探测的跳跃按 Tr[Cport ρ]/Tr[Cρ] 归属端口。

    Returns:
        (点击记录, 窗口结束时的归一化态矢量)
    """
    if len(kernel.init_weights) == 1:
        psi = kernel.init_kets[:, 0].copy()
    else:
        psi = kernel.init_kets[:, rng.choice(len(kernel.init_weights), p=kernel.init_weights)].copy()
    now = 0.0
    events: List[Tuple[float, str]] = []
    while True:
        remaining = kernel.window - now
        survival = kernel.survival(psi)
        u = rng.random()
        if remaining <= 0.0 or u < survival(remaining):
            psi = kernel.evolve(psi, remaining)
            break
        tau = scipy.optimize.brentq(lambda x: survival(x) - u, 0.0, remaining, xtol=1e-14, rtol=1e-14)
        psi = kernel.evolve(psi, tau)
        psi /= np.linalg.norm(psi)
        now += tau

        port_w = np.array([r * np.vdot(op @ psi, op @ psi).real for op, r in zip(kernel.port_ops, kernel.port_rates)])
        dark_w = np.array([r * np.vdot(op @ psi, op @ psi).real for op, r in zip(kernel.dark_ops, kernel.dark_rates)])
        total = port_w.sum() + dark_w.sum()
        pick = rng.random() * total
        if pick < port_w.sum():
            detected = rng.random() < kernel.eta
            idx = int(np.searchsorted(np.cumsum(port_w), rng.random() * port_w.sum(), side="right"))
            idx = min(idx, len(port_w) - 1)
            psi = kernel.port_ops[idx] @ psi
            if detected:
                # 严格递增；同一时刻的数值重合极其罕见，向后推一个 ulp
                if events and now <= events[-1][0]:
                    now = np.nextafter(events[-1][0], np.inf)
                events.append((min(now, kernel.window), kernel.port_ids[idx]))
        else:
            idx = int(np.searchsorted(np.cumsum(dark_w), pick - port_w.sum(), side="right"))
            idx = min(idx, len(dark_w) - 1)
            psi = kernel.dark_ops[idx] @ psi
        psi /= np.linalg.norm(psi)
    psi /= np.linalg.norm(psi)
    return ClickRecord(window=kernel.window, events=events), psi


@dataclass
class _ChunkTally:
    counts: Dict[int, int] = field(default_factory=dict)
    port_counts: Dict[str, int] = field(default_factory=dict)
    pattern_counts: Dict[str, int] = field(default_factory=dict)
    state_sums: Dict[str, np.ndarray] = field(default_factory=dict)

    def merge(self, other: "_ChunkTally") -> None:
        for key, value in other.counts.items():
            self.counts[key] = self.counts.get(key, 0) + value
        for key, value in other.port_counts.items():
            self.port_counts[key] = self.port_counts.get(key, 0) + value
        for key, value in other.pattern_counts.items():
            self.pattern_counts[key] = self.pattern_counts.get(key, 0) + value
        for key, value in other.state_sums.items():
            if key in self.state_sums:
                self.state_sums[key] = self.state_sums[key] + value
            else:
                self.state_sums[key] = value.copy()


def _run_chunk(args: Tuple[TrajectoryKernel, int, int, int, bool]) -> _ChunkTally:
    kernel, seed, start, stop, keep_states = args
    tally = _ChunkTally()
    for i in range(start, stop):
        record, psi = sample_trajectory(kernel, trajectory_rng(seed, i))
        n = len(record.events)
        pattern = record.pattern or NO_CLICKS
        tally.counts[n] = tally.counts.get(n, 0) + 1
        tally.pattern_counts[pattern] = tally.pattern_counts.get(pattern, 0) + 1
        for _, port in record.events:
            tally.port_counts[port] = tally.port_counts.get(port, 0) + 1
        if keep_states:
            proj = np.outer(psi, psi.conj())
            if pattern in tally.state_sums:
                tally.state_sums[pattern] += proj
            else:
                tally.state_sums[pattern] = proj
    return tally


def monte_carlo(
    bundle: SuperoperatorBundle,
    rho0: DensityOperator,
    t: float,
    n_traj: Optional[int] = None,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
    keep_states: bool = True,
) -> MonteCarloResult:
    """
    量子跳跃轨迹采样，估计 P0/P1/P2、各端口点击数与各点击模式的平均条件态

    Args:
        n_traj: 轨迹数，默认取配置
        seed: 主种子，默认取配置
        workers: 进程数，默认取配置；1 表示串行
        keep_states: 是否累加条件态
    """
    n_traj = settings.mc_trajectories if n_traj is None else n_traj
    seed = settings.mc_seed if seed is None else seed
    workers = settings.workers if workers is None else workers
    if n_traj < 1:
        raise ValueError(f"n_traj 必须 >= 1: {n_traj}")

    kernel = build_kernel(bundle, rho0, t)
    chunk = settings.mc_chunk_size
    tasks = [(kernel, seed, lo, min(lo + chunk, n_traj), keep_states) for lo in range(0, n_traj, chunk)]
    logger.info(f"monte carlo: {n_traj} trajectories, seed={seed}, chunks={len(tasks)}, workers={workers}")

    if workers > 1 and len(tasks) > 1:
        with Pool(processes=workers) as pool:
            tallies = pool.map(_run_chunk, tasks)
    else:
        tallies = [_run_chunk(task) for task in tasks]

    total = _ChunkTally()
    for tally in tallies:
        total.merge(tally)

    states: Dict[str, DensityOperator] = {}
    for pattern, acc in sorted(total.state_sums.items()):
        states[pattern] = DensityOperator.from_matrix(bundle.space, acc / total.pattern_counts[pattern])

    return MonteCarloResult(
        n_traj=n_traj,
        seed=seed,
        window=float(t),
        eta=bundle.eta,
        counts=dict(sorted(total.counts.items())),
        port_counts=dict(sorted(total.port_counts.items())),
        pattern_counts=dict(sorted(total.pattern_counts.items())),
        conditional_states=states,
    )

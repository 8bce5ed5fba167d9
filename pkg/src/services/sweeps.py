"""
参数扫描、阈值区域与实验基准

所有网格按确定顺序输出；并行时按下标归并，行顺序与进程数无关。
"""
import logging
import math
from multiprocessing import Pool
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from src.config import settings
from src.models.run import BenchmarkPreset, BenchmarkResult, PublishedValue, RegionSpec, SweepSpec
from src.models.scheme import BellSubset, SchemeId, SchemeParams
from src.services.protocols import build_model, engine_triple, evaluate, make_params
from src.services.purification import purified_region

logger = logging.getLogger(__name__)

TRIPLE_COLUMNS = ("p_suc", "fidelity", "avg_fidelity")
ENGINE_COLUMNS = tuple(f"engine_{name}" for name in TRIPLE_COLUMNS)
REGION_COLUMNS = ("p1", "eta", "steps", "fidelity", "p_total", "fidelity_ok", "probability_ok", "inside")


def region_threshold_1cw(f_th: float, eta: float) -> float:
    """F_1cw > F_th 等价于 p1 < (1−F_th)/(1−ηF_th)"""
    if not 0.0 < f_th < 1.0:
        raise ValueError(f"f_th 超出 (0, 1): {f_th}")
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta 超出 [0, 1]: {eta}")
    return (1.0 - f_th) / (1.0 - eta * f_th)


def region_success_dominance(eta: float) -> Tuple[float, float]:
    """
    P_suc:1cw > P_suc:2（p2 = 1）的 p1 区间，即 ηp² − p + η/4 < 0 的两根之间

    η = 0 时两者都为零，区间为空，返回 (0, 0)。
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta 超出 [0, 1]: {eta}")
    if eta == 0.0:
        return 0.0, 0.0
    root = math.sqrt(1.0 - eta * eta)
    low = eta / (2.0 * (1.0 + root))
    high = (1.0 + root) / (2.0 * eta)
    return min(max(low, 0.0), 1.0), min(max(high, 0.0), 1.0)


def crossover_fidelity(eta: float) -> float:
    """两类区域边界在小 η 下重合处的保真度 1 − η/4"""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta 超出 [0, 1]: {eta}")
    return 1.0 - eta / 4.0


def _params_at(spec: SweepSpec, value: float) -> SchemeParams:
    values = dict(spec.fixed)
    key = spec.parameter
    if key == "t":
        # 扫描时间时发射概率由窗口决定
        for name in ("p1", "p_cav", "p2"):
            values.pop(name, None)
        if spec.scheme is SchemeId.ONE_PHOTON_CW:
            key = "t_cw"
    values[key] = value
    return make_params(spec.scheme, **values)


def _sweep_row(args: Tuple[SweepSpec, float]) -> Dict[str, float]:
    spec, value = args
    params = _params_at(spec, value)
    row = {spec.parameter: value, **evaluate(params).model_dump()}
    if spec.engine:
        triple = engine_triple(build_model(spec.scheme, params), getattr(params, "bell_subset", BellSubset.HALF))
        row.update({f"engine_{k}": v for k, v in triple.model_dump().items()})
    return row


def sweep(spec: SweepSpec, workers: Optional[int] = None) -> pd.DataFrame:
    """
    一维参数扫描，端点包含在内

    Returns:
        列为 (参数, p_suc, fidelity, avg_fidelity[, engine_*])，按网格顺序排列
    """
    workers = settings.workers if workers is None else workers
    grid = np.linspace(spec.start, spec.stop, spec.steps)
    tasks = [(spec, float(v)) for v in grid]
    logger.debug(f"sweep {spec.scheme.value}/{spec.parameter}: {len(tasks)} points, engine={spec.engine}")
    if workers > 1 and spec.engine:
        with Pool(processes=workers) as pool:
            rows = pool.map(_sweep_row, tasks)
    else:
        rows = [_sweep_row(task) for task in tasks]
    columns = [spec.parameter, *TRIPLE_COLUMNS] + (list(ENGINE_COLUMNS) if spec.engine else [])
    frame = pd.DataFrame(rows, columns=columns)
    if spec.label:
        frame.insert(0, "label", spec.label)
    return frame


_ETAS = (0.05, 0.5, 0.95)
_ETAS_DESC = (0.95, 0.5, 0.1)
_TIME_SPAN = dict(start=0.0, stop=5.0, steps=201)

FIGURE_SWEEPS: Dict[str, List[SweepSpec]] = {
    "1cw-time": [
        SweepSpec(scheme="1cw", parameter="t", fixed={"eta": eta}, label=f"eta={eta}", **_TIME_SPAN)
        for eta in _ETAS
    ],
    "1pls-time-eps2": [
        SweepSpec(scheme="1pls", parameter="t", fixed={"eta": 0.8, "eps2": eps2}, label=f"eps2={eps2}", **_TIME_SPAN)
        for eps2 in (0.05, 0.5, 0.9)
    ],
    "1pls-time-eta": [
        SweepSpec(scheme="1pls", parameter="t", fixed={"eta": eta, "eps2": 0.3}, label=f"eta={eta}", **_TIME_SPAN)
        for eta in _ETAS_DESC
    ],
    "1pls-eps2-limit": [
        SweepSpec(
            scheme="1pls",
            parameter="eps2",
            start=0.0,
            stop=1.0,
            steps=201,
            fixed={"eta": eta, "t": math.inf},
            label=f"eta={eta}",
        )
        for eta in _ETAS_DESC
    ],
    "2ph-time": [
        SweepSpec(scheme="2ph", parameter="t", fixed={"eta": eta}, label=f"eta={eta}", **_TIME_SPAN)
        for eta in _ETAS
    ],
}


def figure_sweep(name: str) -> pd.DataFrame:
    """按预设生成一组曲线，拼接为一张表（label 列区分曲线）"""
    if name not in FIGURE_SWEEPS:
        raise ValueError(f"未知曲线预设: {name}，可选 {sorted(FIGURE_SWEEPS)}")
    return pd.concat([sweep(spec) for spec in FIGURE_SWEEPS[name]], ignore_index=True)


PRESETS: Dict[str, BenchmarkPreset] = {
    "ca40-freespace": BenchmarkPreset(
        name="ca40-freespace",
        scheme="1cw",
        description="40Ca+ free-space single-photon scheme",
        params={"p1": 0.15, "eta": 0.005},
        sequence_rate=1e5,
        published={
            "p_suc": PublishedValue(value=1.5e-3),
            "fidelity": PublishedValue(value=0.85),
            "avg_fidelity": PublishedValue(value=1.3e-3),
            "events_per_second": PublishedValue(value=150.0),
        },
    ),
    "ca40-cavity": BenchmarkPreset(
        name="ca40-cavity",
        scheme="1pls",
        description="40Ca+ in a high-finesse cavity, pulsed Raman transfer",
        params={"eps2": 0.15, "eta": 0.31, "p_cav": 0.1},
        sequence_rate=3.3e4,
        published={
            "p_suc": PublishedValue(value=6.0e-2),
            "fidelity": PublishedValue(value=0.88),
            "avg_fidelity": PublishedValue(value=5.3e-2),
            "events_per_second": PublishedValue(value=2.0e3),
        },
    ),
    "yb171-twophoton": BenchmarkPreset(
        name="yb171-twophoton",
        scheme="2ph",
        description="171Yb+ two-photon coincidence scheme, single Bell outcome",
        params={"eta": 6.7e-4, "p2": 2.0 / 3.0, "measured_fidelity": 0.81},
        sequence_rate=5.2e5,
        bell_subset="quarter",
        published={
            "p_suc": PublishedValue(value=4.9e-8),
            "fidelity": PublishedValue(value=0.81),
            "avg_fidelity": PublishedValue(value=4e-8, digits=1),
            "seconds_per_event": PublishedValue(value=39.0),
        },
    ),
}


def published_tolerance(published: PublishedValue, rtol: Optional[float] = None) -> float:
    """
    与文献值比较的绝对容差

    取 rtol·|value| 与末位有效数字一个单位中的较大者；文献数值按位数截断或舍入，
    两者都落在一个单位之内。
    """
    if rtol is None:
        rtol = settings.benchmark_rtol
    unit = 10.0 ** (math.floor(math.log10(published.value)) - published.digits + 1)
    return max(rtol * published.value, unit)


def benchmark(preset: str) -> BenchmarkResult:
    """
    实验基准：效率三元组与事件速率，并与文献值比较

    Raises:
        ValueError: 未知预设
    """
    if preset not in PRESETS:
        raise ValueError(f"未知基准预设: {preset}，可选 {sorted(PRESETS)}")
    spec = PRESETS[preset]
    values = dict(spec.params)
    if spec.bell_subset is not None:
        values["bell_subset"] = spec.bell_subset
    triple = evaluate(make_params(spec.scheme, **values))
    per_second = spec.sequence_rate * triple.p_suc
    measured = {
        "p_suc": triple.p_suc,
        "fidelity": triple.fidelity,
        "avg_fidelity": triple.avg_fidelity,
        "events_per_second": per_second,
        "seconds_per_event": 1.0 / per_second if per_second > 0 else math.inf,
    }
    deviations: Dict[str, float] = {}
    passed = True
    for key, published in spec.published.items():
        diff = abs(measured[key] - published.value)
        deviations[key] = diff / published.value
        if diff > published_tolerance(published):
            logger.warning(f"{preset}: {key} = {measured[key]:.4g}，文献值 {published.value:g}")
            passed = False
    return BenchmarkResult(
        preset=preset,
        scheme=spec.scheme,
        triple=triple,
        sequence_rate=spec.sequence_rate,
        events_per_second=per_second,
        seconds_per_event=measured["seconds_per_event"],
        deviations=deviations,
        passed=passed,
    )


def _closed_form_row(p1: float, eta: float, f_th: float) -> Dict[str, object]:
    triple = evaluate(make_params(SchemeId.ONE_PHOTON_CW, p1=p1, eta=eta))
    fidelity_ok = triple.fidelity > f_th
    probability_ok = triple.p_suc > eta ** 2 / 2.0
    return {
        "p1": p1,
        "eta": eta,
        "steps": 0,
        "fidelity": triple.fidelity,
        "p_total": triple.p_suc,
        "fidelity_ok": fidelity_ok,
        "probability_ok": probability_ok,
        "inside": fidelity_ok and probability_ok,
    }


def _region_row(args: Tuple[float, np.ndarray, float, List[int]]) -> List[Dict[str, object]]:
    """固定 η 的一行；J = 0 用解析式，J > 0 走纯化"""
    eta, p1_grid, f_th, steps_list = args
    purified = [j for j in steps_list if j > 0]
    by_point: Dict[Tuple[float, int], Dict[str, object]] = {}
    if purified:
        for point in purified_region(p1_grid, [eta], f_th, purified):
            by_point[(point.p1, point.steps)] = point.model_dump()
    rows: List[Dict[str, object]] = []
    for p1 in p1_grid:
        for j in steps_list:
            rows.append(_closed_form_row(float(p1), eta, f_th) if j == 0 else by_point[(float(p1), j)])
    return rows


def region_map(spec: RegionSpec, workers: Optional[int] = None) -> pd.DataFrame:
    """
    (p1, η) 网格上的区域判定，p2 = 1

    行顺序：η 外层、p1 内层、J 最内层
    """
    workers = settings.workers if workers is None else workers
    p1_grid = np.linspace(*spec.p1_range, spec.resolution)
    eta_grid = np.linspace(*spec.eta_range, spec.resolution)
    tasks = [(float(eta), p1_grid, spec.f_th, spec.steps_list) for eta in eta_grid]
    logger.info(f"region map: {spec.resolution}x{spec.resolution}, F_th={spec.f_th}, J={spec.steps_list}")
    if workers > 1 and max(spec.steps_list) > 0:
        with Pool(processes=workers) as pool:
            chunks = pool.map(_region_row, tasks)
    else:
        chunks = [_region_row(task) for task in tasks]
    return pd.DataFrame([row for chunk in chunks for row in chunk], columns=list(REGION_COLUMNS))

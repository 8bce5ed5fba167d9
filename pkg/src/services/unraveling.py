"""
主方程展开引擎

阻尼 L、跃迁 J、点击 C 的构造，无点击传播子 U(τ)，0/1/2 次点击的概率与条件态。
时间有序积分默认用"点击计数"分块上三角生成元一次求指数作用得到，自适应积分作为交叉校验。
"""
import logging
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.integrate  # type: ignore
import scipy.linalg  # type: ignore
from scipy.sparse.linalg import expm_multiply  # type: ignore

from src.models.errors import NullEventError, QuadratureError
from src.models.quantum import DensityOperator, Operator, Superoperator
from src.models.unraveling import (
    ConditionalState,
    DetectorPort,
    JumpChannel,
    PortSign,
    ProtocolModel,
    ScenarioProbabilities,
    SuperoperatorBundle,
)
from src.utils.quantum import adjoint, expm, spost, spre, sprepost, vec

logger = logging.getLogger(__name__)

# 条件化事件的最小概率
NULL_EVENT_FLOOR = 1e-15
QUAD_EPSREL = 1e-9


def beam_splitter_ports(channels: Sequence[JumpChannel], eta: float) -> List[DetectorPort]:
    """
    50:50 分束器输出端口

    同一标签 ξ 下，发射体 1、2 的通道组合成 d±ξ = (A1 ± A2)/√2。

    Raises:
        ValueError: 某个标签缺少成对通道或两侧速率不同
    """
    by_label: Dict[str, Dict[int, JumpChannel]] = {}
    for ch in channels:
        if ch.detected:
            by_label.setdefault(ch.label, {})[ch.emitter] = ch
    ports: List[DetectorPort] = []
    for label, pair in by_label.items():
        if set(pair) != {1, 2}:
            raise ValueError(f"通道 {label!r} 需要两个发射体")
        a1, a2 = pair[1], pair[2]
        if not np.isclose(a1.rate, a2.rate, rtol=1e-12, atol=0.0):
            raise ValueError(f"通道 {label!r} 两侧速率不同: {a1.rate} vs {a2.rate}")
        for sign in (PortSign.PLUS, PortSign.MINUS):
            s = 1.0 if sign is PortSign.PLUS else -1.0
            d = (a1.operator.matrix + s * a2.operator.matrix) / np.sqrt(2.0)
            ports.append(
                DetectorPort(
                    sign=sign,
                    label=label,
                    operator=Operator(space=a1.space, matrix=d),
                    rate=a1.rate,
                    eta=eta,
                )
            )
    return ports


def build_bundle(channels: Sequence[JumpChannel], ports: Sequence[DetectorPort]) -> SuperoperatorBundle:
    """
    构造超算符集合

    Lρ = −Σ R(A†Aρ + ρA†A)，Jρ = Σ 2R AρA†，Cport ρ = 2Rη dρd†。

    Raises:
        ValueError: 通道为空、空间不一致、η 不统一或越界
    """
    if not channels:
        raise ValueError("至少需要一个跃迁通道")
    space = channels[0].space
    for item in list(channels) + list(ports):
        if item.operator.space != space:
            raise ValueError("通道与端口必须位于同一希尔伯特空间")
    etas = {p.eta for p in ports}
    if len(etas) > 1:
        raise ValueError(f"所有端口的 η 必须一致: {sorted(etas)}")
    eta = etas.pop() if etas else 0.0
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"η 超出 [0, 1]: {eta}")

    d2 = space.dim ** 2
    damping = np.zeros((d2, d2), dtype=np.complex128)
    jump = np.zeros((d2, d2), dtype=np.complex128)
    for ch in channels:
        a = ch.operator
        ada = (adjoint(a) @ a).matrix
        damping -= 0.5 * ch.rate * (spre(ada) + spost(ada))
        jump += ch.rate * sprepost(a, adjoint(a))

    port_clicks: Dict[str, Superoperator] = {}
    click = np.zeros((d2, d2), dtype=np.complex128)
    for p in ports:
        if p.port_id in port_clicks:
            raise ValueError(f"重复端口: {p.port_id}")
        m = p.rate * eta * sprepost(p.operator, adjoint(p.operator))
        port_clicks[p.port_id] = Superoperator(space=space, matrix=m)
        click += m

    logger.debug(f"bundle built: dim={space.dim}, channels={len(channels)}, ports={len(ports)}, eta={eta}")
    return SuperoperatorBundle(
        space=space,
        eta=eta,
        damping=Superoperator(space=space, matrix=damping),
        jump=Superoperator(space=space, matrix=jump),
        click=Superoperator(space=space, matrix=click),
        port_clicks=port_clicks,
        ports={p.port_id: p for p in ports},
        no_click_generator=Superoperator(space=space, matrix=damping + jump - click),
        channels=tuple(channels),
    )


def bundle_for(model: ProtocolModel) -> SuperoperatorBundle:
    return build_bundle(model.channels, model.ports)


def no_click_propagator(bundle: SuperoperatorBundle, tau: float) -> Superoperator:
    """U(τ) = exp[(L + J − C)τ]"""
    return expm(bundle.no_click_generator, tau)


def _check_time(t: float) -> None:
    if t < 0 or not np.isfinite(t):
        raise ValueError(f"时间必须为非负有限值: {t}")


def _trace_of_vec(v: np.ndarray, d: int) -> float:
    return float(np.real(v[:: d + 1].sum()))


def _click_scale(bundle: SuperoperatorBundle) -> float:
    # 点击耦合按 1/η 放大，避免小 η 下条件态精度损失
    return 1.0 / bundle.eta if bundle.eta > 0.0 else 1.0


def _chain(bundle: SuperoperatorBundle, couplings: Sequence[np.ndarray], rho0: DensityOperator, t: float) -> List[np.ndarray]:
    """
    点击计数链 [[G,0,..],[C1,G,..],[0,C2,G],..] 在 t 时刻作用于 (vec ρ0, 0, ...)

    Returns:
        每个扇区的向量化（未归一化）态
    """
    d2 = bundle.space.dim ** 2
    g = bundle.no_click_generator.matrix
    k = len(couplings) + 1
    block = np.zeros((k * d2, k * d2), dtype=np.complex128)
    for i in range(k):
        block[i * d2:(i + 1) * d2, i * d2:(i + 1) * d2] = g
    for i, c in enumerate(couplings):
        block[(i + 1) * d2:(i + 2) * d2, i * d2:(i + 1) * d2] = c
    start = np.zeros(k * d2, dtype=np.complex128)
    start[:d2] = vec(rho0.matrix)
    if t == 0:
        out = start
    else:
        out = expm_multiply(block * t, start)
    return [out[i * d2:(i + 1) * d2] for i in range(k)]


def scenario_probabilities(
    bundle: SuperoperatorBundle,
    rho0: DensityOperator,
    t: float,
    method: str = "augmented",
) -> ScenarioProbabilities:
    """
    探测窗口 [0, t] 内恰好 0、1、2 次点击的概率

    Args:
        method: "augmented"（点击计数生成元）或 "quadrature"（自适应积分交叉校验）

    Raises:
        ValueError: t 非法或未知 method
        QuadratureError: 自适应积分未收敛
    """
    _check_time(t)
    d = bundle.space.dim
    if method == "augmented":
        s = _click_scale(bundle)
        c = bundle.click.matrix * s
        x0, x1, x2 = _chain(bundle, [c, c], rho0, t)
        return ScenarioProbabilities(
            p0=_trace_of_vec(x0, d),
            p1=_trace_of_vec(x1, d) / s,
            p2=_trace_of_vec(x2, d) / s ** 2,
        )
    if method == "quadrature":
        x0, x1, x2 = _quadrature_sectors(bundle, bundle.click.matrix, bundle.click.matrix, rho0, t)
        return ScenarioProbabilities(p0=_trace_of_vec(x0, d), p1=_trace_of_vec(x1, d), p2=_trace_of_vec(x2, d))
    raise ValueError(f"未知 method: {method}")


def _quad_vec(f, t: float, what: str) -> np.ndarray:
    result, _, info = scipy.integrate.quad_vec(f, 0.0, t, epsrel=QUAD_EPSREL, epsabs=1e-14, full_output=True)
    if not info.success:
        raise QuadratureError(f"{what}: {info.message}")
    return result


def _one_click_quadrature(g: np.ndarray, op: np.ndarray, v0: np.ndarray, t: float) -> np.ndarray:
    if t == 0:
        return np.zeros_like(v0)
    return _quad_vec(
        lambda tau: scipy.linalg.expm(g * (t - tau)) @ (op @ (scipy.linalg.expm(g * tau) @ v0)),
        t,
        "one-click integral",
    )


def _quadrature_sectors(
    bundle: SuperoperatorBundle,
    first: np.ndarray,
    second: np.ndarray,
    rho0: DensityOperator,
    t: float,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    g = bundle.no_click_generator.matrix
    v0 = vec(rho0.matrix)
    x0 = scipy.linalg.expm(g * t) @ v0
    x1 = _one_click_quadrature(g, first, v0, t)
    if t == 0:
        return x0, x1, np.zeros_like(v0)
    logger.warning("nested quadrature for the two-click sector is slow")
    x2 = _quad_vec(
        lambda tau2: scipy.linalg.expm(g * (t - tau2)) @ (second @ _one_click_quadrature(g, first, v0, tau2)),
        t,
        "two-click integral",
    )
    return x0, x1, x2


def _conditioned(bundle: SuperoperatorBundle, v: np.ndarray, probability: float, ports: Tuple[str, ...]) -> ConditionalState:
    if probability < NULL_EVENT_FLOOR:
        raise NullEventError(f"clicks at {','.join(ports)}", probability)
    d = bundle.space.dim
    m = v.reshape((d, d), order="F")
    state = DensityOperator.from_matrix(bundle.space, m, normalize=True)
    return ConditionalState(probability=min(probability, 1.0), state=state, ports=ports)


def conditional_state_one_click(
    bundle: SuperoperatorBundle,
    rho0: DensityOperator,
    port: str,
    t: float,
    method: str = "augmented",
) -> ConditionalState:
    """
    单次点击（在指定端口）的事件概率与归一化条件态

    ρ ∝ ∫_0^t U(t−τ) Cport U(τ) ρ0 dτ

    Raises:
        NullEventError: 事件概率低于 1e-15
    """
    _check_time(t)
    d = bundle.space.dim
    cp = bundle.port_click(port).matrix
    if method == "augmented":
        s = _click_scale(bundle)
        _, x1 = _chain(bundle, [cp * s], rho0, t)
        return _conditioned(bundle, x1 / s, _trace_of_vec(x1, d) / s, (port,))
    if method == "quadrature":
        x1 = _one_click_quadrature(bundle.no_click_generator.matrix, cp, vec(rho0.matrix), t)
        return _conditioned(bundle, x1, _trace_of_vec(x1, d), (port,))
    raise ValueError(f"未知 method: {method}")


def conditional_state_two_clicks(
    bundle: SuperoperatorBundle,
    rho0: DensityOperator,
    port1: str,
    port2: str,
    t: float,
    ordered: bool = False,
) -> ConditionalState:
    """
    两次点击的事件概率与归一化条件态

    ordered=False 时，不同端口的两种时间顺序都计入。

    Raises:
        NullEventError: 事件概率低于 1e-15
    """
    _check_time(t)
    d = bundle.space.dim
    s = _click_scale(bundle)
    c1 = bundle.port_click(port1).matrix * s
    c2 = bundle.port_click(port2).matrix * s
    orders = [(c1, c2)]
    if port1 != port2 and not ordered:
        orders.append((c2, c1))
    total = np.zeros(d * d, dtype=np.complex128)
    for first, second in orders:
        _, _, x2 = _chain(bundle, [first, second], rho0, t)
        total += x2
    total /= s ** 2
    return _conditioned(bundle, total, _trace_of_vec(total, d), (port1, port2))


def tau_independence_check(
    bundle: SuperoperatorBundle,
    rho0: DensityOperator,
    port: str,
    t: float,
    taus: Optional[Iterable[float]] = None,
) -> float:
    """
    单次点击条件态与点击时刻 τ 无关性的数值检验

    比较归一化的 U(t−τ) Cport U(τ) ρ0 与 τ = t 时的值。

    Returns:
        τ 网格上逐元素最大偏差
    """
    _check_time(t)
    d = bundle.space.dim
    g = bundle.no_click_generator.matrix
    cp = bundle.port_click(port).matrix * _click_scale(bundle)
    grid = np.linspace(0.0, t, 20) if taus is None else np.asarray(list(taus), dtype=float)
    v0 = vec(rho0.matrix)

    def conditioned(tau: float) -> Optional[np.ndarray]:
        v = expm_multiply(g * tau, v0) if tau > 0 else v0
        v = cp @ v
        if t - tau > 0:
            v = expm_multiply(g * (t - tau), v)
        tr = _trace_of_vec(v, d)
        if abs(tr) < NULL_EVENT_FLOOR:
            return None
        return v / tr

    reference = conditioned(t)
    if reference is None:
        raise NullEventError(f"click at {port} at the window end", 0.0)
    deviation = 0.0
    for tau in grid:
        if not 0.0 <= tau <= t:
            raise ValueError(f"τ={tau} 超出窗口 [0, {t}]")
        rho = conditioned(float(tau))
        if rho is None:
            logger.warning(f"skip tau={tau:.6g}: click has zero weight")
            continue
        deviation = max(deviation, float(np.max(np.abs(rho - reference))))
    logger.debug(f"tau independence at {port}: max deviation {deviation:.3e} over {len(grid)} points")
    return deviation

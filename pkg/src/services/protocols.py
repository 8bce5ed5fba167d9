"""
三种协议：解析效率公式、引擎模型构造与实验速率换算

1cw: 连续驱动自发 Raman 散射，单光子探测
1pls: 原子-腔系统脉冲 Raman 转移，单光子探测
2ph: 双光子符合探测
"""
import logging
import math
from typing import Dict, List, Tuple, Union

import numpy as np

from src.models.errors import NullEventError
from src.models.quantum import CAVITY, LAMBDA_ATOM, TWO_LEVEL, DensityOperator, HilbertSpace
from src.models.scheme import (
    BellSubset,
    EfficiencyTriple,
    RamanRateParams,
    SchemeId,
    SchemeParams,
    SchemeParams1cw,
    SchemeParams1pls,
    SchemeParams2ph,
)
from src.models.unraveling import JumpChannel, ProtocolModel
from src.services.unraveling import (
    beam_splitter_ports,
    build_bundle,
    conditional_state_one_click,
    conditional_state_two_clicks,
    scenario_probabilities,
)
from src.utils.bell import bell_state
from src.utils.quantum import embed, fidelity, partial_trace, transition

logger = logging.getLogger(__name__)

# 双光子方案中投影到 Bell 态的符合点击
PSI_PLUS_PAIRS: Tuple[Tuple[str, str], ...] = (("D+e", "D+g"), ("D-e", "D-g"))
PSI_MINUS_PAIRS: Tuple[Tuple[str, str], ...] = (("D+e", "D-g"), ("D+g", "D-e"))


def detection_efficiency(chi: float, eta_d: float) -> float:
    """η = χ·η_d（收集效率 × 探测器量子效率）"""
    for name, value in (("chi", chi), ("eta_d", eta_d)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} 超出 [0, 1]: {value}")
    return chi * eta_d


def _ratio(num: float, den: float) -> float:
    # 0/0 只在成功概率为零时出现，此时保真度无定义，记为 0
    return num / den if den > 0.0 else 0.0


def eval_1cw(params: SchemeParams1cw) -> EfficiencyTriple:
    """
    连续驱动单光子方案

    P = 2ηp1(1−ηp1)，F = (1−p1)/(1−ηp1)，F̄ = 2ηp1(1−p1)
    """
    p1, eta = params.emission_probability, params.eta
    p_suc = 2.0 * eta * p1 * (1.0 - eta * p1)
    fid = _ratio(1.0 - p1, 1.0 - eta * p1)
    return EfficiencyTriple(p_suc=p_suc, fidelity=fid, avg_fidelity=2.0 * eta * p1 * (1.0 - p1) if p_suc > 0 else 0.0)


def eval_1pls(params: SchemeParams1pls) -> EfficiencyTriple:
    """
    腔内脉冲单光子方案

    p_cav = ε²(1−e^{−κT})，P = 2ηp_cav(1−ηp_cav)，F = (1−ε²)/(1−ηp_cav)
    """
    p_cav, eta, eps2 = params.leak_probability, params.eta, params.eps2
    p_suc = 2.0 * eta * p_cav * (1.0 - eta * p_cav)
    fid = _ratio(1.0 - eps2, 1.0 - eta * p_cav)
    return EfficiencyTriple(p_suc=p_suc, fidelity=fid, avg_fidelity=2.0 * eta * p_cav * (1.0 - eps2) if p_suc > 0 else 0.0)


def eval_2ph(params: SchemeParams2ph) -> EfficiencyTriple:
    """
    双光子方案

    P = ½η²p2²（或 ¼，只计单一 Bell 态），F = 1；给定实验保真度时用于 F̄
    """
    p2, eta = params.emission_probability, params.eta
    p_suc = params.bell_subset.factor * eta ** 2 * p2 ** 2
    fid = 1.0 if params.measured_fidelity is None else params.measured_fidelity
    return EfficiencyTriple.of(p_suc, fid)


def evaluate(params: SchemeParams) -> EfficiencyTriple:
    if isinstance(params, SchemeParams1cw):
        return eval_1cw(params)
    if isinstance(params, SchemeParams1pls):
        return eval_1pls(params)
    if isinstance(params, SchemeParams2ph):
        return eval_2ph(params)
    raise ValueError(f"未知参数类型: {type(params).__name__}")


def make_params(scheme: Union[SchemeId, str], **values) -> SchemeParams:
    """按协议编号构造参数对象（忽略值为 None 的字段）"""
    scheme = SchemeId(scheme)
    values = {k: v for k, v in values.items() if v is not None}
    if scheme is SchemeId.ONE_PHOTON_CW:
        return SchemeParams1cw(**values)
    if scheme is SchemeId.ONE_PHOTON_PULSED:
        return SchemeParams1pls(**values)
    return SchemeParams2ph(**values)


def scheme_of(params: SchemeParams) -> SchemeId:
    if isinstance(params, SchemeParams1cw):
        return SchemeId.ONE_PHOTON_CW
    if isinstance(params, SchemeParams1pls):
        return SchemeId.ONE_PHOTON_PULSED
    return SchemeId.TWO_PHOTON


def window_for(scheme: Union[SchemeId, str], probability: float, rate: float = 1.0) -> float:
    """由单原子（单侧）发射概率反推探测窗口；1pls 此处的 probability 为 1−e^{−κT}"""
    if not 0.0 <= probability <= 1.0:
        raise ValueError(f"概率超出 [0, 1]: {probability}")
    SchemeId(scheme)
    if probability >= 1.0:
        return math.inf
    return -math.log1p(-probability) / rate


def _finite_window(params: SchemeParams) -> float:
    window = params.window
    if not math.isfinite(window):
        raise ValueError("引擎需要有限的探测窗口")
    return window


def _model_1cw(params: SchemeParams1cw) -> ProtocolModel:
    atom = HilbertSpace.of(TWO_LEVEL)
    space = HilbertSpace.of(TWO_LEVEL, TWO_LEVEL)
    lower = transition(atom, "g", "e")
    channels = tuple(
        JumpChannel(emitter=j + 1, operator=embed(lower, j, space), rate=params.gamma_eg)
        for j in range(2)
    )
    return ProtocolModel(
        scheme=SchemeId.ONE_PHOTON_CW,
        space=space,
        rho0=DensityOperator.from_ket(space, space.ket("e", "e")),
        channels=channels,
        ports=tuple(beam_splitter_ports(channels, params.eta)),
        window=_finite_window(params),
        emitter_factors=(0, 1),
        target=bell_state("psi_plus", space, zero="e", one="g"),
    )


def _model_1pls(params: SchemeParams1pls) -> ProtocolModel:
    # 因子顺序：原子1、腔1、原子2、腔2
    space = HilbertSpace.of(TWO_LEVEL, CAVITY, TWO_LEVEL, CAVITY)
    side = HilbertSpace.of(TWO_LEVEL, CAVITY)
    eps = math.sqrt(params.eps2)
    alpha = math.sqrt(1.0 - params.eps2)
    side_ket = alpha * side.ket("e", "0") + eps * side.ket("g", "1")
    lower = transition(HilbertSpace.of(CAVITY), "0", "1")
    channels = tuple(
        JumpChannel(emitter=j + 1, operator=embed(lower, 2 * j + 1, space), rate=params.kappa)
        for j in range(2)
    )
    atoms = HilbertSpace.of(TWO_LEVEL, TWO_LEVEL)
    return ProtocolModel(
        scheme=SchemeId.ONE_PHOTON_PULSED,
        space=space,
        rho0=DensityOperator.from_ket(space, np.kron(side_ket, side_ket)),
        channels=channels,
        ports=tuple(beam_splitter_ports(channels, params.eta)),
        window=_finite_window(params),
        emitter_factors=(0, 2),
        target=bell_state("psi_plus", atoms, zero="e", one="g"),
    )


def _model_2ph(params: SchemeParams2ph) -> ProtocolModel:
    atom = HilbertSpace.of(LAMBDA_ATOM)
    space = HilbertSpace.of(LAMBDA_ATOM, LAMBDA_ATOM)
    channels = tuple(
        JumpChannel(
            emitter=j + 1,
            label=xi,
            operator=embed(transition(atom, xi, "r"), j, space),
            rate=0.5 * params.gamma,
        )
        for xi in ("e", "g")
        for j in range(2)
    )
    return ProtocolModel(
        scheme=SchemeId.TWO_PHOTON,
        space=space,
        rho0=DensityOperator.from_ket(space, space.ket("r", "r")),
        channels=channels,
        ports=tuple(beam_splitter_ports(channels, params.eta)),
        window=_finite_window(params),
        emitter_factors=(0, 1),
        target=bell_state("psi_plus", space, zero="e", one="g"),
    )


def build_model(scheme: Union[SchemeId, str], params: SchemeParams) -> ProtocolModel:
    """
    构造协议的引擎模型（初态、跃迁通道、探测端口）

    Raises:
        ValueError: 未知协议编号或参数类型不匹配
    """
    try:
        scheme = SchemeId(scheme)
    except ValueError as exc:
        raise ValueError(f"未知协议: {scheme}") from exc
    builders = {
        SchemeId.ONE_PHOTON_CW: (SchemeParams1cw, _model_1cw),
        SchemeId.ONE_PHOTON_PULSED: (SchemeParams1pls, _model_1pls),
        SchemeId.TWO_PHOTON: (SchemeParams2ph, _model_2ph),
    }
    expected, builder = builders[scheme]
    if not isinstance(params, expected):
        raise ValueError(f"{scheme.value} 需要 {expected.__name__}，实际 {type(params).__name__}")
    return builder(params)


def repumped_1cw_model(params: SchemeParams1cw, repump_rate: float) -> ProtocolModel:
    """在 1cw 模型上加入不被探测的 |g⟩→|e⟩ 回泵通道，使发射体可多次发射"""
    if repump_rate <= 0:
        raise ValueError(f"回泵速率必须为正: {repump_rate}")
    model = _model_1cw(params)
    atom = HilbertSpace.of(TWO_LEVEL)
    pump = transition(atom, "e", "g")
    extra = tuple(
        JumpChannel(emitter=j + 1, label="pump", operator=embed(pump, j, model.space), rate=repump_rate, detected=False)
        for j in range(2)
    )
    return model.model_copy(update={"channels": model.channels + extra})


def bell_pairs(subset: BellSubset) -> Dict[Tuple[str, str], str]:
    """计入成功的双光子端口组合 -> 目标 Bell 态名称"""
    pairs = {pair: "psi_plus" for pair in PSI_PLUS_PAIRS}
    if subset is BellSubset.HALF:
        pairs.update({pair: "psi_minus" for pair in PSI_MINUS_PAIRS})
    return pairs


def engine_triple(model: ProtocolModel, subset: BellSubset = BellSubset.HALF) -> EfficiencyTriple:
    """
    由展开引擎得到的效率三元组

    单光子方案：P 为恰好一次点击的总概率，F 取 D+ 端口条件态（对腔因子求迹后）与 Ψ+ 的保真度。
    双光子方案：P 为计入的 Bell 投影符合点击概率之和，F 取这些组合中的最小保真度。
    事件概率为零时记为 (0, 0, 0)；此时解析式的 F 可以非零（如 1pls 在 η = 0 时为 1 − ε²），引擎不做外推。
    """
    try:
        return _engine_triple(model, subset)
    except NullEventError as exc:
        logger.warning(f"{model.scheme.value} engine: {exc}")
        return EfficiencyTriple.of(0.0, 0.0)


def _engine_triple(model: ProtocolModel, subset: BellSubset) -> EfficiencyTriple:
    bundle = build_bundle(model.channels, model.ports)
    if model.scheme is SchemeId.TWO_PHOTON:
        p_suc = 0.0
        fids: List[float] = []
        for (port1, port2), name in bell_pairs(subset).items():
            cond = conditional_state_two_clicks(bundle, model.rho0, port1, port2, model.window)
            target = bell_state(name, model.space, zero="e", one="g")
            p_suc += cond.probability
            fids.append(fidelity(target, cond.state))
        return EfficiencyTriple.of(min(p_suc, 1.0), min(fids))

    probs = scenario_probabilities(bundle, model.rho0, model.window)
    cond = conditional_state_one_click(bundle, model.rho0, "D+", model.window)
    atoms = partial_trace(cond.state, model.emitter_factors)
    return EfficiencyTriple.of(min(max(probs.p1, 0.0), 1.0), fidelity(model.target, atoms))


def raman_rates(params: RamanRateParams) -> Tuple[float, float]:
    """
    远失谐 Raman 驱动下的有效速率与分支比

    γ′ = (Ω²/Γ_r²)(Γ_rg + Γ_rD)，α_rg = Γ_rg/(Γ_rg + Γ_rD)

    Raises:
        ValueError: Γ_rg + Γ_rD = 0 或 Γ_r = 0
    """
    branches = params.gamma_rg + params.gamma_rd
    if branches <= 0.0:
        raise ValueError("Γ_rg + Γ_rD 必须为正")
    if params.gamma_r <= 0.0:
        raise ValueError("Γ_r 必须为正")
    gamma_prime = (params.omega_er ** 2 / params.gamma_r ** 2) * branches
    return gamma_prime, params.gamma_rg / branches


def p1_experimental(gamma_prime: float, alpha_rg: float, t_cw: float) -> float:
    """p1 = α_rg(1 − e^{−γ′T_cw})"""
    if gamma_prime < 0 or t_cw < 0:
        raise ValueError("γ′ 与 T_cw 必须非负")
    if not 0.0 <= alpha_rg <= 1.0:
        raise ValueError(f"α_rg 超出 [0, 1]: {alpha_rg}")
    if math.isinf(t_cw):
        return alpha_rg if gamma_prime > 0 else 0.0
    return alpha_rg * -math.expm1(-gamma_prime * t_cw)

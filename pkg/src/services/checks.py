"""
自检套件

每个套件返回 CheckReport；CLI 以退出码 2 报告未通过的套件。
"""
import logging
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from src.config import settings
from src.models.purification import BellDiagonalState, LocalRotation
from src.models.run import CheckReport
from src.models.scheme import BellSubset, SchemeParams1cw, SchemeParams1pls, SchemeParams2ph
from src.services.monte_carlo import monte_carlo
from src.services.protocols import build_model, engine_triple, evaluate, repumped_1cw_model
from src.services.purification import PAIR, oracle_step, recurrence_step
from src.services.unraveling import build_bundle, scenario_probabilities, tau_independence_check
from src.utils.bell import bell_coefficients, bell_state

logger = logging.getLogger(__name__)

TAU_TOL = 1e-10
PURIFY_TOL = 1e-10
COMPLETENESS_TOL = 1e-8
# 回泵对照组的 τ 依赖至少应达到此值
NEGATIVE_CONTROL_MIN = 1e-3

ETA_GRID = np.linspace(0.1, 0.9, 5)
WINDOW_GRID = np.linspace(0.2, 2.0, 5)


def _one_photon_models(eta: float, t: float):
    return {
        "1cw": build_model("1cw", SchemeParams1cw(eta=eta, t_cw=t)),
        "1pls": build_model("1pls", SchemeParams1pls(eta=eta, eps2=0.3, t=t)),
    }


def check_tau_independence(t: float = 1.0) -> CheckReport:
    """单次点击条件态与点击时刻无关；回泵模型作为对照应明显依赖点击时刻"""
    details: List[Dict[str, Any]] = []
    worst = 0.0
    for eta in (0.1, 0.5, 0.9):
        for name, model in _one_photon_models(eta, t).items():
            bundle = build_bundle(model.channels, model.ports)
            deviation = tau_independence_check(bundle, model.rho0, "D+", model.window)
            worst = max(worst, deviation)
            details.append({"model": name, "eta": eta, "deviation": deviation})

    control = repumped_1cw_model(SchemeParams1cw(eta=0.5, t_cw=t), repump_rate=1.0)
    control_dev = tau_independence_check(build_bundle(control.channels, control.ports), control.rho0, "D+", control.window)
    details.append({"model": "1cw+repump", "eta": 0.5, "deviation": control_dev, "negative_control": True})
    passed = worst < TAU_TOL and control_dev > NEGATIVE_CONTROL_MIN
    return CheckReport(suite="tau-independence", passed=passed, max_deviation=worst, tolerance=TAU_TOL, details=details)


def check_engine_vs_analytic() -> CheckReport:
    """5×5 (η, 窗口) 网格上引擎与解析式一致"""
    tol = settings.engine_tol
    details: List[Dict[str, Any]] = []
    worst = 0.0
    for eta in ETA_GRID:
        for t in WINDOW_GRID:
            cases = {
                "1cw": (SchemeParams1cw(eta=eta, t_cw=t), BellSubset.HALF),
                "1pls": (SchemeParams1pls(eta=eta, eps2=0.3, t=t), BellSubset.HALF),
                "2ph": (SchemeParams2ph(eta=eta, t=t), BellSubset.HALF),
                "2ph-quarter": (SchemeParams2ph(eta=eta, t=t, bell_subset="quarter"), BellSubset.QUARTER),
            }
            for name, (params, subset) in cases.items():
                expected = evaluate(params)
                got = engine_triple(build_model(name.split("-")[0], params), subset)
                deviation = max(
                    abs(got.p_suc - expected.p_suc),
                    abs(got.fidelity - expected.fidelity),
                    abs(got.avg_fidelity - expected.avg_fidelity),
                )
                worst = max(worst, deviation)
                details.append({"model": name, "eta": float(eta), "t": float(t), "deviation": deviation})
    return CheckReport(suite="engine-vs-analytic", passed=worst <= tol, max_deviation=worst, tolerance=tol, details=details)


def _random_bell_diagonal(rng: np.random.Generator) -> BellDiagonalState:
    weights = rng.dirichlet(np.ones(4))
    return BellDiagonalState.of(weights / weights.sum())


def check_purify_oracle(n_states: int = 100, seed: Optional[int] = None) -> CheckReport:
    """系数递推与 16×16 直接模拟一致；Φ+ 为 N = 1 的不动点"""
    rng = np.random.default_rng(settings.mc_seed if seed is None else seed)
    worst = 0.0
    for _ in range(n_states):
        state = _random_bell_diagonal(rng)
        for rotation in (LocalRotation.X, LocalRotation.Z):
            n_rec, rec = recurrence_step(state, rotation)
            n_orc, out, _ = oracle_step(state.to_density(PAIR), rotation)
            deviation = max(abs(n_rec - n_orc), float(np.max(np.abs(np.array(rec.coefficients) - bell_coefficients(out)))))
            worst = max(worst, deviation)

    details: List[Dict[str, Any]] = [{"states": n_states, "max_deviation": worst}]
    fixed_ok = True
    for rotation in (LocalRotation.X, LocalRotation.Z):
        n, out, _ = oracle_step(bell_state("phi_plus", PAIR), rotation)
        fixed_dev = max(abs(n - 1.0), abs(bell_coefficients(out)[0] - 1.0))
        fixed_ok = fixed_ok and fixed_dev <= PURIFY_TOL
        details.append({"fixed_point": rotation.value, "N": n, "deviation": fixed_dev})
    return CheckReport(
        suite="purify-oracle",
        passed=worst <= PURIFY_TOL and fixed_ok,
        max_deviation=worst,
        tolerance=PURIFY_TOL,
        details=details,
    )


def check_completeness() -> CheckReport:
    """P0 + P1 + P2 = 1"""
    worst = 0.0
    details: List[Dict[str, Any]] = []
    for eta in ETA_GRID:
        for t in WINDOW_GRID:
            models = {
                **_one_photon_models(float(eta), float(t)),
                "2ph": build_model("2ph", SchemeParams2ph(eta=eta, t=t)),
            }
            for name, model in models.items():
                probs = scenario_probabilities(build_bundle(model.channels, model.ports), model.rho0, model.window)
                deviation = abs(probs.completeness - 1.0)
                worst = max(worst, deviation)
                details.append({"model": name, "eta": float(eta), "t": float(t), "deviation": deviation})
    return CheckReport(
        suite="completeness",
        passed=worst <= COMPLETENESS_TOL,
        max_deviation=worst,
        tolerance=COMPLETENESS_TOL,
        details=details,
    )


def check_monte_carlo(n_traj: Optional[int] = None, seed: Optional[int] = None, workers: Optional[int] = None) -> CheckReport:
    """1cw 基准点上采样的 P1 落在解析值的 4σ 内；同一种子结果逐位一致"""
    params = SchemeParams1cw(p1=0.15, eta=0.005)
    model = build_model("1cw", params)
    bundle = build_bundle(model.channels, model.ports)
    result = monte_carlo(bundle, model.rho0, model.window, n_traj=n_traj, seed=seed, workers=workers, keep_states=False)
    expected = evaluate(params).p_suc
    sigma = np.sqrt(expected * (1.0 - expected) / result.n_traj)
    z = abs(result.p1 - expected) / sigma

    repeat_n = min(result.n_traj, settings.mc_chunk_size)
    first = monte_carlo(bundle, model.rho0, model.window, n_traj=repeat_n, seed=result.seed, workers=1, keep_states=False)
    second = monte_carlo(bundle, model.rho0, model.window, n_traj=repeat_n, seed=result.seed, workers=1, keep_states=False)
    reproducible = first.model_dump() == second.model_dump()
    return CheckReport(
        suite="monte-carlo",
        passed=bool(z <= 4.0 and reproducible),
        max_deviation=float(z),
        tolerance=4.0,
        details=[{**result.summary(), "expected_p1": expected, "sigma": float(sigma), "reproducible": reproducible}],
    )


SUITES: Dict[str, Callable[..., CheckReport]] = {
    "tau-independence": check_tau_independence,
    "engine-vs-analytic": check_engine_vs_analytic,
    "purify-oracle": check_purify_oracle,
    "completeness": check_completeness,
    "monte-carlo": check_monte_carlo,
}


def run_check(suite: str, **options: Any) -> CheckReport:
    """
    运行自检套件

    Raises:
        ValueError: 未知套件
    """
    if suite not in SUITES:
        raise ValueError(f"未知自检套件: {suite}，可选 {sorted(SUITES)}")
    report = SUITES[suite](**options)
    level = logging.INFO if report.passed else logging.ERROR
    logger.log(level, f"check {suite}: passed={report.passed}, max deviation {report.max_deviation:.3e} (tol {report.tolerance:.1e})")
    return report

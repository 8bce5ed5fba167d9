"""
rae 命令行入口

退出码：0 成功，1 用法错误，2 自检未通过，3 I/O 错误
"""
import argparse
import json
import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

from src.config import settings
from src.models.errors import QuadratureError
from src.models.purification import LocalRotation
from src.models.run import RegionSpec, SweepSpec
from src.models.scheme import BellSubset, SchemeId
from src.services.checks import SUITES, run_check
from src.services.monte_carlo import monte_carlo
from src.services.protocols import build_model, engine_triple, evaluate, make_params
from src.services.purification import pair_source_1cw, run_plan, steps_to_threshold
from src.services.storage import ResultStorage, to_jsonable
from src.services.sweeps import FIGURE_SWEEPS, PRESETS, benchmark, figure_sweep, region_map, sweep
from src.services.unraveling import build_bundle, conditional_state_one_click, scenario_probabilities
from src.utils.quantum import fidelity, partial_trace

logger = logging.getLogger("rae")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CHECK_FAILED = 2
EXIT_IO = 3

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class UsageError(Exception):
    """命令行参数错误"""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        raise UsageError(message)


def _add_scheme_args(p: argparse.ArgumentParser, scheme_required: bool = True) -> None:
    p.add_argument("--scheme", choices=[s.value for s in SchemeId], required=scheme_required)
    p.add_argument("--eta", type=float, help="探测效率 η")
    p.add_argument("--p1", type=float, help="1cw 单原子发射概率")
    p.add_argument("--eps2", type=float, help="1pls Raman 转移概率 |ε|²")
    p.add_argument("--p-cav", dest="p_cav", type=float, help="1pls 单侧泄漏概率")
    p.add_argument("--p2", type=float, help="2ph 单原子发射概率")
    p.add_argument("--t", type=float, help="探测窗口（基准速率单位）")
    p.add_argument("--subset", choices=["half", "quarter"], default=None, help="2ph 计入的 Bell 结果")


def _add_output_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, help="输出文件（默认写入输出目录下的新运行目录）")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rae", description="远程原子纠缠协议效率分析")
    parser.add_argument("--log-level", choices=["debug", "info", "warning", "error"], default=None)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analytic", help="解析效率三元组")
    _add_scheme_args(p)
    _add_output_args(p)

    p = sub.add_parser("sweep", help="一维参数扫描（CSV）")
    _add_scheme_args(p, scheme_required=False)
    p.add_argument("--param", choices=["t", "p1", "eps2", "p2", "eta"])
    p.add_argument("--start", type=float)
    p.add_argument("--stop", type=float)
    p.add_argument("--steps", type=int, default=101)
    p.add_argument("--engine", action="store_true", help="同时输出引擎结果列")
    p.add_argument("--figure", choices=sorted(FIGURE_SWEEPS), help="曲线预设")
    p.add_argument("--workers", type=int, default=None)
    _add_output_args(p)

    p = sub.add_parser("unravel", help="展开引擎：点击概率与条件态保真度")
    _add_scheme_args(p)
    p.add_argument("--method", choices=["augmented", "quadrature"], default="augmented")
    _add_output_args(p)

    p = sub.add_parser("mc", help="量子跳跃 Monte Carlo")
    _add_scheme_args(p)
    p.add_argument("--n-traj", dest="n_traj", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    _add_output_args(p)

    p = sub.add_parser("purify", help="1cw 纠缠对的递归纯化")
    p.add_argument("--p1", type=float, required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--steps-J", dest="steps_j", type=int, default=1)
    p.add_argument("--fth", type=float, default=None, help="给定时求达到阈值的最少轮数")
    p.add_argument("--rotation", choices=[r.value for r in LocalRotation], default=LocalRotation.ADAPTIVE.value)
    p.add_argument("--engine", action="store_true", help="以引擎条件态为纠缠对来源")
    _add_output_args(p)

    p = sub.add_parser("region", help="(p1, η) 区域图（CSV）")
    p.add_argument("--fth", type=float, required=True)
    p.add_argument("--steps-J", dest="steps_j", type=int, nargs="+", default=[0])
    p.add_argument("--resolution", type=int, default=200)
    p.add_argument("--workers", type=int, default=None)
    _add_output_args(p)

    p = sub.add_parser("benchmark", help="实验基准")
    p.add_argument("--preset", choices=sorted(PRESETS), default=None, help="默认运行全部预设")
    _add_output_args(p)

    p = sub.add_parser("check", help="自检套件")
    p.add_argument("--suite", choices=[*sorted(SUITES), "all"], default="all")
    p.add_argument("--n-traj", dest="n_traj", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    _add_output_args(p)
    return parser


def _scheme_values(args: argparse.Namespace) -> Dict[str, Any]:
    scheme = SchemeId(args.scheme)
    if scheme is SchemeId.ONE_PHOTON_CW:
        return {"eta": args.eta, "p1": args.p1, "t_cw": args.t}
    if scheme is SchemeId.ONE_PHOTON_PULSED:
        return {"eta": args.eta, "eps2": args.eps2, "t": args.t, "p_cav": args.p_cav}
    return {"eta": args.eta, "p2": args.p2, "t": args.t, "bell_subset": args.subset}


def _emit(payload: Any) -> None:
    print(json.dumps(to_jsonable(payload), ensure_ascii=False, indent=2))


def _save_json(args: argparse.Namespace, payload: Any, filename: str, parameters: Dict[str, Any], started: datetime, **extra: Any) -> Any:
    path = ResultStorage().save_json(payload, filename, args.command, parameters, started, out=args.out, **extra)
    return {"output": str(path), "result": payload}


def cmd_analytic(args: argparse.Namespace, started: datetime) -> int:
    values = _scheme_values(args)
    triple = evaluate(make_params(args.scheme, **values))
    if args.out:
        _save_json(args, triple, "analytic.json", values, started, scheme=args.scheme)
    _emit(triple)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, started: datetime) -> int:
    if args.figure:
        frame = figure_sweep(args.figure)
        parameters: Dict[str, Any] = {"figure": args.figure}
        scheme = FIGURE_SWEEPS[args.figure][0].scheme.value
    else:
        if not args.scheme or not args.param or args.start is None or args.stop is None:
            raise UsageError("sweep 需要 --figure，或 --scheme --param --start --stop")
        fixed = {k: v for k, v in _scheme_values(args).items() if v is not None}
        fixed.pop("t_cw" if args.param == "t" and args.scheme == "1cw" else args.param, None)
        spec = SweepSpec(
            scheme=args.scheme,
            parameter=args.param,
            start=args.start,
            stop=args.stop,
            steps=args.steps,
            fixed=fixed,
            engine=args.engine,
        )
        frame = sweep(spec, workers=args.workers)
        parameters = spec.model_dump(mode="json")
        scheme = args.scheme
    path = ResultStorage().save_frame(frame, "sweep.csv", args.command, parameters, started, out=args.out, scheme=scheme)
    _emit({"output": str(path), "rows": len(frame)})
    return EXIT_OK


def cmd_unravel(args: argparse.Namespace, started: datetime) -> int:
    values = _scheme_values(args)
    params = make_params(args.scheme, **values)
    model = build_model(args.scheme, params)
    bundle = build_bundle(model.channels, model.ports)
    probs = scenario_probabilities(bundle, model.rho0, model.window, method=args.method)
    result: Dict[str, Any] = {
        "window": model.window,
        "probabilities": {**probs.model_dump(), "completeness": probs.completeness},
        "engine": engine_triple(model, getattr(params, "bell_subset", BellSubset.HALF)),
        "analytic": evaluate(params),
    }
    if model.scheme is not SchemeId.TWO_PHOTON:
        fids = {}
        for port in bundle.ports:
            cond = conditional_state_one_click(bundle, model.rho0, port, model.window, method=args.method)
            fids[port] = {"probability": cond.probability, "fidelity": fidelity(model.target, partial_trace(cond.state, model.emitter_factors))}
        result["ports"] = fids
    if args.out:
        result = _save_json(args, result, "unravel.json", values, started, scheme=args.scheme)
    _emit(result)
    return EXIT_OK


def cmd_mc(args: argparse.Namespace, started: datetime) -> int:
    values = _scheme_values(args)
    params = make_params(args.scheme, **values)
    model = build_model(args.scheme, params)
    result = monte_carlo(
        build_bundle(model.channels, model.ports),
        model.rho0,
        model.window,
        n_traj=args.n_traj,
        seed=args.seed,
        workers=args.workers,
    )
    summary: Dict[str, Any] = result.summary()
    summary["pattern_counts"] = result.pattern_counts
    if model.scheme is not SchemeId.TWO_PHOTON and "D+" in result.conditional_states:
        summary["fidelity_D+"] = fidelity(model.target, partial_trace(result.conditional_states["D+"], model.emitter_factors))
    summary["analytic"] = evaluate(params)
    payload = _save_json(args, summary, "mc.json", {**values, "n_traj": result.n_traj}, started, scheme=args.scheme, seed=result.seed)
    _emit(payload)
    return EXIT_OK


def cmd_purify(args: argparse.Namespace, started: datetime) -> int:
    source = pair_source_1cw(args.p1, args.eta, engine=args.engine)
    if args.fth is not None:
        plan = steps_to_threshold(source, args.fth, max_steps=max(args.steps_j, 10), rotation=args.rotation)
        result: Any = {"f_th": args.fth, "plan": plan}
    else:
        result = run_plan(source, args.steps_j, args.rotation)
    parameters = {"p1": args.p1, "eta": args.eta, "steps_J": args.steps_j, "fth": args.fth, "rotation": args.rotation}
    if args.out:
        result = _save_json(args, result, "purify.json", parameters, started, scheme="1cw")
    _emit(result)
    return EXIT_OK


def cmd_region(args: argparse.Namespace, started: datetime) -> int:
    spec = RegionSpec(f_th=args.fth, steps_list=args.steps_j, resolution=args.resolution)
    frame = region_map(spec, workers=args.workers)
    path = ResultStorage().save_frame(frame, "region.csv", args.command, spec.model_dump(mode="json"), started, out=args.out, scheme="1cw")
    _emit({"output": str(path), "rows": len(frame), "inside": int(frame["inside"].sum())})
    return EXIT_OK


def cmd_benchmark(args: argparse.Namespace, started: datetime) -> int:
    names: List[str] = [args.preset] if args.preset else sorted(PRESETS)
    results = [benchmark(name) for name in names]
    payload: Any = results[0] if args.preset else results
    if args.out:
        payload = _save_json(args, payload, "benchmark.json", {"presets": names}, started)
    _emit(payload)
    return EXIT_OK


def cmd_check(args: argparse.Namespace, started: datetime) -> int:
    suites = sorted(SUITES) if args.suite == "all" else [args.suite]
    reports = []
    for suite in suites:
        options: Dict[str, Any] = {}
        if suite == "monte-carlo":
            options = {"n_traj": args.n_traj, "seed": args.seed, "workers": args.workers}
        reports.append(run_check(suite, **options))
    payload: Any = [{k: v for k, v in r.model_dump().items() if k != "details"} for r in reports]
    if args.out:
        payload = _save_json(args, reports, "check.json", {"suites": suites}, started, seed=args.seed)
    _emit(payload)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK_FAILED


COMMANDS = {
    "analytic": cmd_analytic,
    "sweep": cmd_sweep,
    "unravel": cmd_unravel,
    "mc": cmd_mc,
    "purify": cmd_purify,
    "region": cmd_region,
    "benchmark": cmd_benchmark,
    "check": cmd_check,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"rae: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(level=(args.log_level or settings.log_level).upper(), format=LOG_FORMAT)
    started = datetime.now()
    try:
        return COMMANDS[args.command](args, started)
    except UsageError as exc:
        print(f"rae: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        logger.exception(f"I/O error: {exc}")
        return EXIT_IO
    except QuadratureError as exc:
        logger.error(f"{args.command}: quadrature failed: {exc}")
        return EXIT_USAGE
    except ValueError as exc:
        logger.error(f"{args.command}: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

import argparse
import asyncio
import logging
import sys
from typing import Any, Dict, List, Optional, Tuple

import aiofiles

from config import Config, SearchSettings, parse_tolerance
from fault_tolerance import InputError, OssCalcError
from performance import performance_monitor

logger = logging.getLogger("OssCalc")

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - [%(filename)s:%(lineno)d] - %(message)s"
GAP_WARNING_RATIO = 0.05

EXIT_OK = 0
EXIT_PROPERTY_FAILURE = 1
EXIT_INPUT_ERROR = 2


def setup_logging(level: str = "INFO", log_file: str = ""):
    """日志只写 stderr（stdout 留给 JSON 输出）"""
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file, encoding="utf-8", mode="a"))
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )


# ========== 1. 文件读写 ==========


async def read_json(path: str) -> Any:
    from utils import loads

    try:
        async with aiofiles.open(path, "r", encoding="utf-8") as f:
            return loads(await f.read())
    except OSError as e:
        raise InputError(f"无法读取 {path}: {e}") from e


async def emit(payload: Dict[str, Any], out: Optional[str] = None):
    """JSON 写到 stdout；指定 --out 时同时写文件"""
    from utils import dumps

    text = dumps(payload)
    sys.stdout.write(text + "\n")
    sys.stdout.flush()
    if out:
        async with aiofiles.open(out, "w", encoding="utf-8") as f:
            await f.write(text + "\n")
        logger.info(f"✅ 报告已写入 {out}")


# ========== 2. 命令 ==========


async def cmd_norm(args, settings: SearchSettings) -> Tuple[Dict[str, Any], int]:
    """元素列的放大范数（--dual 时把元素当作对偶空间中的泛函）"""
    from sqspaces import amp_norm, dual_norm
    from utils import element_from_json, estimate_to_json, space_from_json, ReportFormatter

    space = space_from_json(await read_json(args.space))
    x = element_from_json(space, await read_json(args.element))
    if args.level is not None and args.level != x.level:
        raise InputError(f"--level {args.level} 与元素列层数 {x.level} 不符")

    if args.dual:
        estimate = dual_norm(space, x.coords, settings, route=args.route)
    else:
        estimate = amp_norm(x, settings)
    if estimate.gap > GAP_WARNING_RATIO * max(estimate.upper, 1e-300):
        logger.warning(f"⚠️ 区间较宽: {ReportFormatter.format_estimate(estimate)}")
    else:
        logger.info(f"✅ {space.describe()} 第 {x.level} 层: {ReportFormatter.format_estimate(estimate)}")
    return estimate_to_json(estimate, include_witness=args.witness), EXIT_OK


async def cmd_sbnorm(args, settings: SearchSettings) -> Tuple[Dict[str, Any], int]:
    from sqoperators import amp_op_norm, sb_norm
    from utils import estimate_to_json, operator_from_json

    phi = operator_from_json(await read_json(args.operator))
    if args.level is not None:
        estimate = amp_op_norm(phi, args.level, settings).at_level(args.level)
    else:
        estimate = sb_norm(phi, settings)
    return estimate_to_json(estimate, include_witness=args.witness), EXIT_OK


async def cmd_classify(args, settings: SearchSettings) -> Tuple[Dict[str, Any], int]:
    from sqoperators import classify
    from utils import classification_to_json, operator_from_json

    phi = operator_from_json(await read_json(args.operator))
    record = classify(phi, int(Config.N_MAX), settings)
    return classification_to_json(record), EXIT_OK


async def cmd_verify(args, settings: SearchSettings) -> Tuple[Dict[str, Any], int]:
    from harness import run_all_async, run_suite_async
    from utils import ReportFormatter

    kwargs = dict(
        trials=args.trials,
        seed=int(Config.SEED),
        n_max=int(Config.N_MAX),
        jobs=int(Config.JOBS),
        overrides={"ascent_restarts": args.restarts},
    )
    if args.suite == "all":
        reports = await run_all_async(**kwargs)
    else:
        reports = [await run_suite_async(args.suite, **kwargs)]

    for report in reports:
        logger.info(ReportFormatter.format_report(report))
    logger.info(ReportFormatter.format_summary(reports))
    logger.debug(f"性能报告: {performance_monitor.get_performance_report()}")

    passed = all(r.passed for r in reports)
    if args.suite == "all":
        payload = {"passed": passed, "reports": [r.to_dict() for r in reports]}
    else:
        payload = reports[0].to_dict()
    return payload, EXIT_OK if passed else EXIT_PROPERTY_FAILURE


async def cmd_free(args, settings: SearchSettings) -> Tuple[Dict[str, Any], int]:
    from freeobjects import build_free
    from utils import truncation_to_json

    return truncation_to_json(build_free(args.max_level, args.base)), EXIT_OK


async def cmd_cofree(args, settings: SearchSettings) -> Tuple[Dict[str, Any], int]:
    from freeobjects import build_cofree
    from utils import truncation_to_json

    return truncation_to_json(build_cofree(args.max_level, args.base)), EXIT_OK


async def cmd_tensor(args, settings: SearchSettings) -> Tuple[Dict[str, Any], int]:
    from constructions import max_tensor_norm
    from utils import estimate_to_json, tensor_from_json

    u = tensor_from_json(await read_json(args.tensor))
    return estimate_to_json(max_tensor_norm(u, settings), include_witness=args.witness), EXIT_OK


async def cmd_list(args, settings: SearchSettings) -> Tuple[Dict[str, Any], int]:
    from harness import list_suites, suite_budget

    suites = []
    for suite_id in list_suites():
        budget, _ = suite_budget(suite_id)
        suites.append({"suite_id": suite_id, "trials": budget.trials, "tolerance": budget.tolerance})
    return {"suites": suites}, EXIT_OK


COMMANDS = {
    "norm": cmd_norm,
    "sbnorm": cmd_sbnorm,
    "classify": cmd_classify,
    "verify": cmd_verify,
    "free": cmd_free,
    "cofree": cmd_cofree,
    "tensor": cmd_tensor,
    "list": cmd_list,
}


# ========== 3. 参数 ==========


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=lambda s: int(s, 0), help="随机种子")
    common.add_argument("--n-max", type=int, dest="n_max", help="最大层数")
    common.add_argument("--restarts", type=int, help="上升重启次数")
    common.add_argument("--jobs", type=int, help="并发试验数上限")
    common.add_argument(
        "--tolerance", action="append", metavar="SUITE=VALUE", help="覆盖套件容差（可重复）"
    )
    common.add_argument("--config", help="JSON 配置文件（缺省读 OSSCALC_CONFIG）")
    common.add_argument("--out", help="同时把结果写入该文件")
    common.add_argument("--log-level", dest="log_level", help="DEBUG/INFO/WARNING/ERROR")
    common.add_argument("--stats", action="store_true", help="在输出中附带性能报告")

    parser = argparse.ArgumentParser(
        prog="osscalc", description="算子序列空间范数计算与性质验证"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("norm", parents=[common], help="元素列的放大范数")
    p.add_argument("space", help="空间描述符 JSON")
    p.add_argument("element", help="元素坐标 JSON")
    p.add_argument("--level", type=int)
    p.add_argument("--dual", action="store_true", help="按对偶空间 X^△ 求范数")
    p.add_argument("--route", choices=("structural", "pairing"))
    p.add_argument("--witness", action="store_true", help="输出完整见证矩阵")

    p = sub.add_parser("sbnorm", parents=[common], help="算子的 sb 范数")
    p.add_argument("operator", help="算子 JSON")
    p.add_argument("--level", type=int, help="只求第 n 层放大范数")
    p.add_argument("--witness", action="store_true")

    p = sub.add_parser("classify", parents=[common], help="逐层单射/满射常数")
    p.add_argument("operator", help="算子 JSON")

    p = sub.add_parser("verify", parents=[common], help="运行性质套件")
    p.add_argument("suite", help="套件 ID 或 all")
    p.add_argument("--trials", type=int)

    for name, text in (("free", "自由对象截断"), ("cofree", "余自由对象截断")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("max_level", type=int, help="截断层数 N")
        p.add_argument("base", type=int, nargs="?", default=1, help="基集大小 |Λ|")

    p = sub.add_parser("tensor", parents=[common], help="极大张量积范数")
    p.add_argument("tensor", help="张量元素 JSON")
    p.add_argument("--witness", action="store_true")

    sub.add_parser("list", parents=[common], help="列出套件")
    return parser


def configure(args) -> SearchSettings:
    """命令行 > 配置文件 > 环境变量 > 默认值"""
    Config.load_file(args.config)
    tolerances = dict(parse_tolerance(item) for item in args.tolerance or ())
    Config.apply_overrides(
        seed=args.seed,
        n_max=args.n_max,
        ascent_restarts=args.restarts,
        jobs=args.jobs,
        log_level=args.log_level,
        tolerance_overrides={**Config.TOLERANCE_OVERRIDES, **tolerances} if tolerances else None,
    )
    Config.validate_config()
    return SearchSettings.from_config()


async def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level or Config.LOG_LEVEL, Config.LOG_FILE)

    try:
        settings = configure(args)
        setup_logging(Config.LOG_LEVEL, Config.LOG_FILE)
        payload, code = await COMMANDS[args.command](args, settings)
    except (OssCalcError, ValueError) as e:
        from utils import error_to_json

        logger.error(f"❌ {args.command} 失败: {e}")
        await emit(error_to_json(e))
        return EXIT_INPUT_ERROR

    if args.stats:
        payload["performance"] = performance_monitor.get_performance_report()
    await emit(payload, args.out)
    return code


if __name__ == "__main__":
    try:
        sys.exit(asyncio.run(main()))
    except KeyboardInterrupt:
        logger.info("已被用户中断")
        sys.exit(130)

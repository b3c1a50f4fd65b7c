import os
import hashlib
import logging
from dataclasses import asdict, dataclass, replace
from typing import Any, Dict, List, Mapping, Optional, Tuple

import ujson

logger = logging.getLogger("OssCalc.Config")

# 添加 dotenv 加载
try:
    from dotenv import load_dotenv

    load_dotenv()
except ImportError:
    logger.debug("python-dotenv 未安装，将使用系统环境变量")

_HERE = os.path.dirname(os.path.abspath(__file__))


def _env_int(name: str, default: int) -> int:
    return int(os.getenv(name, str(default)), 0)


def _env_float(name: str, default: float) -> float:
    return float(os.getenv(name, str(default)))


def parse_tolerance(text: str) -> Tuple[str, float]:
    """"smith=1e-6" → ("smith", 1e-6)"""
    suite_id, sep, value = str(text).partition("=")
    suite_id = suite_id.strip()
    if not sep or not suite_id:
        raise ValueError(f"容差覆盖格式应为 SUITE=VALUE: {text!r}")
    try:
        return suite_id, float(value)
    except ValueError as e:
        raise ValueError(f"容差覆盖 {suite_id} 的值不是数字: {value!r}") from e


def _env_tolerances(name: str) -> Dict[str, float]:
    raw = os.getenv(name, "")
    return dict(parse_tolerance(item) for item in raw.split(",") if item.strip())


class Config:
    """配置文件 - 搜索预算与运行参数"""

    # 随机种子
    SEED = _env_int("OSSCALC_SEED", 0x5001)
    N_MAX = _env_int("OSSCALC_N_MAX", 4)

    # 投影上升（下界）
    ASCENT_RESTARTS = _env_int("OSSCALC_ASCENT_RESTARTS", 64)
    ASCENT_STEPS = _env_int("OSSCALC_ASCENT_STEPS", 300)

    # 分解搜索（上界）
    FACTOR_RESTARTS = _env_int("OSSCALC_FACTOR_RESTARTS", 16)
    FACTOR_ROUNDS = _env_int("OSSCALC_FACTOR_ROUNDS", 20)
    FACTOR_MAX_BLOCKS = _env_int("OSSCALC_FACTOR_MAX_BLOCKS", 3)

    # 商空间陪集下降
    QUOTIENT_ITERATIONS = _env_int("OSSCALC_QUOTIENT_ITERATIONS", 200)
    QUOTIENT_RESTARTS = _env_int("OSSCALC_QUOTIENT_RESTARTS", 8)
    QUOTIENT_TOL = _env_float("OSSCALC_QUOTIENT_TOL", 1e-8)
    QUOTIENT_PATIENCE = _env_int("OSSCALC_QUOTIENT_PATIENCE", 20)

    # 单射常数下降
    INJ_RESTARTS = _env_int("OSSCALC_INJ_RESTARTS", 64)

    # 运行参数
    JOBS = _env_int("OSSCALC_JOBS", 1)
    SUITE_TIMEOUT = _env_float("OSSCALC_SUITE_TIMEOUT", 600.0)
    LOG_LEVEL = os.getenv("OSSCALC_LOG_LEVEL", "INFO")
    LOG_FILE = os.getenv("OSSCALC_LOG_FILE", "")
    SUITES_FILE = os.getenv("OSSCALC_SUITES_FILE", os.path.join(_HERE, "suites.json"))

    # 套件容差覆盖: OSSCALC_TOLERANCES="smith=1e-6,functional=1e-2"
    TOLERANCE_OVERRIDES: Dict[str, float] = _env_tolerances("OSSCALC_TOLERANCES")

    # 可由配置文件覆盖的键
    FILE_KEYS = (
        "seed",
        "n_max",
        "ascent_restarts",
        "ascent_steps",
        "factor_restarts",
        "factor_rounds",
        "factor_max_blocks",
        "quotient_iterations",
        "quotient_restarts",
        "quotient_tol",
        "quotient_patience",
        "inj_restarts",
        "jobs",
        "suite_timeout",
        "log_level",
        "log_file",
        "suites_file",
        "tolerance_overrides",
    )

    @classmethod
    def load_file(cls, path: Optional[str] = None) -> Dict[str, Any]:
        """读取 JSON 配置文件（路径缺省取 OSSCALC_CONFIG），返回已应用的键"""
        path = path or os.getenv("OSSCALC_CONFIG", "")
        if not path:
            return {}

        try:
            with open(path, "r", encoding="utf-8") as f:
                data = ujson.load(f)
        except (OSError, ValueError) as e:
            raise ValueError(f"配置文件读取失败 {path}: {e}") from e

        if not isinstance(data, dict):
            raise ValueError(f"配置文件必须是 JSON 对象: {path}")

        unknown = sorted(set(data) - set(cls.FILE_KEYS))
        if unknown:
            raise ValueError(f"配置文件包含未知键: {', '.join(unknown)}")

        for key, value in data.items():
            setattr(cls, key.upper(), value)
        logger.info(f"✅ 已加载配置文件 {path} ({len(data)} 项)")
        return data

    @classmethod
    def apply_overrides(cls, **overrides):
        """命令行参数覆盖（None 表示未指定）"""
        for key, value in overrides.items():
            if value is not None:
                setattr(cls, key.upper(), value)

    @classmethod
    def validate_config(cls):
        """验证配置"""
        errors: List[str] = []

        for name in (
            "ASCENT_RESTARTS",
            "ASCENT_STEPS",
            "FACTOR_RESTARTS",
            "FACTOR_ROUNDS",
            "QUOTIENT_ITERATIONS",
            "QUOTIENT_RESTARTS",
            "QUOTIENT_PATIENCE",
            "INJ_RESTARTS",
        ):
            if int(getattr(cls, name)) < 1:
                errors.append(f"{name} 必须 ≥ 1")

        if not 1 <= int(cls.FACTOR_MAX_BLOCKS) <= 8:
            errors.append("FACTOR_MAX_BLOCKS 必须在 1..8 之间")
        if not 1 <= int(cls.N_MAX) <= 8:
            errors.append("N_MAX 必须在 1..8 之间")
        if not 1 <= int(cls.JOBS) <= 64:
            errors.append("JOBS 必须在 1..64 之间")
        if not 0 < float(cls.QUOTIENT_TOL) <= 1e-2:
            errors.append("QUOTIENT_TOL 必须在 (0, 1e-2] 之间")
        if float(cls.SUITE_TIMEOUT) <= 0:
            errors.append("SUITE_TIMEOUT 必须为正数")
        if int(cls.SEED) < 0:
            errors.append("SEED 必须为非负整数")
        if str(cls.LOG_LEVEL).upper() not in ("DEBUG", "INFO", "WARNING", "ERROR"):
            errors.append("LOG_LEVEL 必须是 DEBUG/INFO/WARNING/ERROR 之一")
        errors.extend(cls._tolerance_errors())

        if errors:
            error_msg = "配置错误:\n" + "\n".join(f"• {error}" for error in errors)
            logger.error(error_msg)
            raise ValueError(error_msg)

        logger.debug("✅ 配置验证通过")

    @classmethod
    def _tolerance_errors(cls) -> List[str]:
        overrides = cls.TOLERANCE_OVERRIDES
        if not isinstance(overrides, Mapping):
            return ["TOLERANCE_OVERRIDES 必须是 {套件: 容差} 映射"]

        from harness import list_suites

        known = set(list_suites())
        errors = []
        for suite_id, value in overrides.items():
            if suite_id not in known:
                errors.append(f"TOLERANCE_OVERRIDES 含未知套件: {suite_id}")
            elif not isinstance(value, (int, float)) or not 0 < float(value) < 1:
                errors.append(f"TOLERANCE_OVERRIDES[{suite_id}] 必须在 (0, 1) 之间")
        return errors


@dataclass(frozen=True)
class SearchSettings:
    """
    搜索预算

    所有求值器都通过它获得重启次数、步数和随机种子；
    lower_search=False 时只计算上界（用于球面收缩）。
    """

    seed: int = 0x5001
    ascent_restarts: int = 64
    ascent_steps: int = 300
    factor_restarts: int = 16
    factor_rounds: int = 20
    factor_max_blocks: int = 3
    quotient_iterations: int = 200
    quotient_restarts: int = 8
    quotient_tol: float = 1e-8
    quotient_patience: int = 20
    inj_restarts: int = 64
    lower_search: bool = True
    dual_route: str = "structural"

    @classmethod
    def from_config(cls, **overrides) -> "SearchSettings":
        settings = cls(
            seed=int(Config.SEED),
            ascent_restarts=int(Config.ASCENT_RESTARTS),
            ascent_steps=int(Config.ASCENT_STEPS),
            factor_restarts=int(Config.FACTOR_RESTARTS),
            factor_rounds=int(Config.FACTOR_ROUNDS),
            factor_max_blocks=int(Config.FACTOR_MAX_BLOCKS),
            quotient_iterations=int(Config.QUOTIENT_ITERATIONS),
            quotient_restarts=int(Config.QUOTIENT_RESTARTS),
            quotient_tol=float(Config.QUOTIENT_TOL),
            quotient_patience=int(Config.QUOTIENT_PATIENCE),
            inj_restarts=int(Config.INJ_RESTARTS),
        )
        return settings.replace(**overrides) if overrides else settings

    def replace(self, **changes) -> "SearchSettings":
        return replace(self, **changes)

    @property
    def quick(self) -> bool:
        return not self.lower_search and self.factor_restarts == 0

    def upper_only(self) -> "SearchSettings":
        """只求上界的快速设置"""
        if self.quick:
            return self
        return replace(self, lower_search=False, factor_restarts=0)

    def digest(self, **context) -> str:
        """预算摘要；context 并入运行参数（如 tolerance、n_max）"""
        payload = ujson.dumps({**asdict(self), **context}, sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


DEFAULT_SETTINGS = SearchSettings()

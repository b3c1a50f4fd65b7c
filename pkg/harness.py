"""
随机性质套件 - 确定性种子、并发试验、机器可读报告

每个套件对单次试验返回 (松弛, 输入数组)，松弛 ≤ 0 表示通过。
试验 t 的随机流只由 (seed, t) 决定，报告与调度顺序无关。
"""

import asyncio
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import ujson

from config import Config, SearchSettings
from constructions import make_dsum_inf, make_dsum_one, make_quotient, max_tensor_norm, tensor_from_elementary
from fault_tolerance import RegistryError, SuiteTimeoutError, TrialCancelled, Watchdog, cancellation
from freeobjects import build_cofree, build_free, induced_trial, universal_trial
from ground import dual_of, lp, opmatrix
from matcore import crandn, op_norm, random_unitary, stack_columns
from performance import performance_monitor
from sqoperators import (
    SeqOperator,
    amp_op_norm,
    classify,
    compose,
    dual_operator,
    canonical_projection,
    injectivity_constant,
    sb_norm,
    surjectivity_constant,
)
from sqspaces import (
    ElementColumn,
    NormEstimate,
    SeqSpaceDesc,
    cstar_diag,
    cstar_matrix,
    dual_desc,
    evaluate,
    evaluate_dual,
    hilb_max,
    level_norm,
    max_space,
    min_space,
    t2,
    t2n_norm,
)
from utils import inputs_digest, json_float

logger = logging.getLogger("OssCalc.Harness")

RENORMALIZE_ROUNDS = 3


# ========== 1. 报告 ==========


@dataclass(frozen=True)
class TrialFailure:
    trial: int
    seed: int
    inputs_digest: str
    slack: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "trial": self.trial,
            "seed": self.seed,
            "inputs_digest": self.inputs_digest,
            "slack": json_float(self.slack),
        }


@dataclass(frozen=True)
class PropertyReport:
    """套件报告；failures 为空 ⇔ worst_slack ≤ 0"""

    suite_id: str
    trials: int
    seed: int
    failures: Tuple[TrialFailure, ...]
    worst_slack: float
    elapsed_ms: int
    config_digest: str

    def __post_init__(self):
        ordered = tuple(sorted(self.failures, key=lambda f: (f.seed, f.trial)))
        object.__setattr__(self, "failures", ordered)

    @property
    def passed(self) -> bool:
        return not self.failures

    def canonical(self) -> Dict[str, Any]:
        """不含 elapsed_ms 的报告，用于逐字节比较"""
        return {
            "suite_id": self.suite_id,
            "trials": self.trials,
            "seed": self.seed,
            "failures": [f.to_dict() for f in self.failures],
            "worst_slack": json_float(self.worst_slack),
            "config_digest": self.config_digest,
        }

    def to_dict(self) -> Dict[str, Any]:
        payload = self.canonical()
        payload["elapsed_ms"] = self.elapsed_ms
        return payload


class TrialOutcome(NamedTuple):
    slack: float
    inputs: Tuple[np.ndarray, ...]


@dataclass
class SuiteContext:
    """单次试验可用的随机流与参数"""

    rng: np.random.Generator
    n_max: int
    settings: SearchSettings
    tolerance: float

    def level(self, cap: Optional[int] = None) -> int:
        top = self.n_max if cap is None else min(cap, self.n_max)
        return int(self.rng.integers(1, top + 1))

    def pick(self, options: Sequence):
        return options[int(self.rng.integers(len(options)))]

    def element(self, space: SeqSpaceDesc, level: int, normalize: bool = False) -> ElementColumn:
        return gen_random_element(space, level, self.rng, normalize=normalize, settings=self.settings)


# ========== 2. 随机生成 ==========


def trial_rng(seed: int, trial: int) -> Tuple[np.random.Generator, int]:
    """试验 t 的独立随机流及其可记录的种子"""
    sequence = np.random.SeedSequence([int(seed), int(trial)])
    trial_seed = int(sequence.generate_state(1, dtype=np.uint64)[0])
    return np.random.default_rng(sequence), trial_seed


def gen_random_element(
    space: SeqSpaceDesc,
    level: int,
    seed_or_rng: Union[int, np.random.Generator],
    normalize: bool = False,
    settings: Optional[SearchSettings] = None,
) -> ElementColumn:
    """
    复高斯坐标的随机元素列

    normalize=True 时除以上界，使元素落在有证书的单位球内；
    浮点舍入可能让上界略大于 1，最多重复归一化三次。
    """
    if isinstance(seed_or_rng, np.random.Generator):
        rng = seed_or_rng
    else:
        rng = np.random.default_rng(seed_or_rng)
    coords = crandn((space.dim, level), rng)
    if normalize:
        settings = settings if settings is not None else SearchSettings.from_config()
        upper_settings = settings.replace(lower_search=False)
        for _ in range(RENORMALIZE_ROUNDS):
            upper = evaluate(space, coords, upper_settings).upper
            if upper <= 1.0:
                break
            coords = coords / upper
    return ElementColumn(space, coords)


def random_operator(
    domain: SeqSpaceDesc, codomain: SeqSpaceDesc, rng: np.random.Generator
) -> SeqOperator:
    """高斯矩阵，按最大奇异值缩放到量级 1"""
    matrix = crandn((codomain.dim, domain.dim), rng)
    return SeqOperator(domain, codomain, matrix / op_norm(matrix))


def random_isometry(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """rows × cols 的列正交矩阵"""
    return random_unitary(rows, rng)[:, :cols]


# ========== 3. 松弛量 ==========


def _excess(lhs: float, rhs: float, tol: float) -> float:
    """lhs ≤ rhs 的违反量（相对容差）"""
    return float(lhs - rhs - tol * max(1.0, abs(rhs)))


def _overlap_slack(a: NormEstimate, b: NormEstimate, tol: float) -> float:
    return max(_excess(a.lower, b.upper, tol), _excess(b.lower, a.upper, tol))


def _match_slack(value: float, reference: float, tol: float) -> float:
    return float(abs(value - reference) - tol * max(1.0, abs(reference)))


# ========== 4. 套件注册表 ==========

SuiteFn = Callable[[SuiteContext], TrialOutcome]
SUITES: Dict[str, SuiteFn] = {}


def suite(suite_id: str):
    """注册性质套件"""

    def decorator(func: SuiteFn) -> SuiteFn:
        if suite_id in SUITES:
            raise RegistryError(f"重复的套件 ID: {suite_id}")
        SUITES[suite_id] = func
        return func

    return decorator


def list_suites() -> List[str]:
    return list(SUITES)


def get_suite(suite_id: str) -> SuiteFn:
    try:
        return SUITES[suite_id]
    except KeyError:
        raise RegistryError(f"未知套件: {suite_id}（可用: {', '.join(SUITES)}）") from None


def _catalog() -> List[SeqSpaceDesc]:
    """精确求值的结构"""
    return [
        hilb_max(3),
        min_space(lp(2, 3)),
        min_space(lp("inf", 3)),
        cstar_matrix(2),
        cstar_diag(3),
        make_dsum_inf([hilb_max(2), min_space(lp(2, 2))]),
        t2(3),
    ]


# ----- sqspaces -----


@suite("axioms")
def _axioms(ctx: SuiteContext) -> TrialOutcome:
    """αx 收缩与列拼接两条公理"""
    space = ctx.pick(_catalog())
    n, m = ctx.level(), ctx.level()
    x = ctx.element(space, n)
    alpha = crandn((m, n), ctx.rng)
    image = evaluate(space, x.coords @ alpha.T, ctx.settings)
    bound = op_norm(alpha) * evaluate(space, x.coords, ctx.settings).upper
    first = _excess(image.lower, bound, ctx.tolerance)

    y = ctx.element(space, ctx.level())
    stacked = evaluate(space, stack_columns(x.coords, y.coords), ctx.settings)
    squares = (
        evaluate(space, x.coords, ctx.settings).upper ** 2
        + evaluate(space, y.coords, ctx.settings).upper ** 2
    )
    second = _excess(stacked.lower**2, squares, ctx.tolerance)
    return TrialOutcome(max(first, second), (x.coords, alpha, y.coords))


@suite("padding-unitary")
def _padding_unitary(ctx: SuiteContext) -> TrialOutcome:
    """补零列与右乘酉矩阵不改变范数（区间重叠）"""
    space = ctx.pick(_catalog() + [max_space(lp(1, 2)), make_dsum_one([t2(1), t2(1)])])
    n = ctx.level()
    x = ctx.element(space, n)
    base = evaluate(space, x.coords, ctx.settings)
    padded = np.hstack([x.coords, np.zeros((space.dim, ctx.level()), dtype=np.complex128)])
    u = random_unitary(n, ctx.rng)
    rotated = x.coords @ u.T
    slack = max(
        _overlap_slack(base, evaluate(space, padded, ctx.settings), ctx.tolerance),
        _overlap_slack(base, evaluate(space, rotated, ctx.settings), ctx.tolerance),
    )
    return TrialOutcome(slack, (x.coords, u))


@suite("sandwich")
def _sandwich(ctx: SuiteContext) -> TrialOutcome:
    """max ‖x_i‖ ≤ ‖x‖ ≤ Σ‖x_i‖ ≤ n‖x‖"""
    space = ctx.pick(_catalog())
    n = ctx.level()
    x = ctx.element(space, n)
    estimate = evaluate(space, x.coords, ctx.settings)
    columns = [level_norm(space, x.coords[:, i], ctx.settings) for i in range(n)]
    total = sum(c.upper for c in columns)
    slack = max(
        _excess(max(c.lower for c in columns), estimate.upper, ctx.tolerance),
        _excess(estimate.lower, total, ctx.tolerance),
        _excess(sum(c.lower for c in columns), n * estimate.upper, ctx.tolerance),
    )
    return TrialOutcome(slack, (x.coords,))


@suite("c-unique")
def _c_unique(ctx: SuiteContext) -> TrialOutcome:
    """ℂ 上 min 与 max 结构都等于 ℓ₂ⁿ"""
    ground = lp(ctx.pick([1, 2, "inf"]), 1)
    x = crandn((1, ctx.level()), ctx.rng)
    reference = float(np.linalg.norm(x))
    slack = -np.inf
    for space in (min_space(ground), max_space(ground)):
        estimate = evaluate(space, x, ctx.settings)
        slack = max(
            slack,
            _match_slack(estimate.midpoint, reference, ctx.tolerance),
            _excess(estimate.gap, 0.0, ctx.tolerance),
        )
    return TrialOutcome(slack, (x,))


@suite("cstar-min")
def _cstar_min(ctx: SuiteContext) -> TrialOutcome:
    """交换 C*-代数 ℓ∞ᵏ 的标准结构就是 min(ℓ∞ᵏ)"""
    k = int(ctx.rng.integers(1, 5))
    x = crandn((k, ctx.level()), ctx.rng)
    a = evaluate(cstar_diag(k), x, ctx.settings)
    b = evaluate(min_space(lp("inf", k)), x, ctx.settings)
    slack = max(
        _match_slack(a.upper, b.upper, ctx.tolerance),
        _match_slack(a.lower, b.lower, ctx.tolerance),
    )
    return TrialOutcome(slack, (x,))


# ----- sqoperators -----


@suite("smith")
def _smith(ctx: SuiteContext) -> TrialOutcome:
    """Min(ℓ₂³) → HilbMax(2): 第 2 层起范数不再变化"""
    phi = random_operator(min_space(lp(2, 3)), hilb_max(2), ctx.rng)
    plateau = [amp_op_norm(phi, n, ctx.settings) for n in (2, 3, 4)]
    reference = plateau[0].upper
    slack = max(_match_slack(e.upper, reference, ctx.tolerance) for e in plateau)
    generic = amp_op_norm(phi, 2, ctx.settings, closed_forms=False)
    slack = max(slack, _match_slack(generic.lower, reference, 1e-3))
    return TrialOutcome(slack, (phi.matrix,))


@suite("functional")
def _functional(ctx: SuiteContext) -> TrialOutcome:
    """线性泛函的各层范数都等于一层范数"""
    k = int(ctx.rng.integers(2, 4))
    domain = ctx.pick(
        [min_space(lp(2, k)), hilb_max(k), min_space(lp("inf", k)), min_space(lp(1, k))]
    )
    phi = random_operator(domain, t2(1), ctx.rng)
    reference = amp_op_norm(phi, 1, ctx.settings).upper
    n = ctx.level(4)
    estimate = amp_op_norm(phi, n, ctx.settings)
    slack = max(
        _match_slack(estimate.lower, reference, ctx.tolerance),
        _match_slack(estimate.upper, reference, ctx.tolerance),
    )
    return TrialOutcome(slack, (phi.matrix,))


@suite("op-duality")
def _op_duality(ctx: SuiteContext) -> TrialOutcome:
    """φ 与 φ^△ 的 sb 范数区间重叠，对偶是反同态"""
    kinds = (t2, hilb_max)
    dims = [int(ctx.rng.integers(1, 4)) for _ in range(3)]
    spaces = [ctx.pick(kinds)(d) for d in dims]
    phi = random_operator(spaces[0], spaces[1], ctx.rng)
    psi = random_operator(spaces[1], spaces[2], ctx.rng)
    slack = _overlap_slack(
        sb_norm(phi, ctx.settings), sb_norm(dual_operator(phi), ctx.settings), ctx.tolerance
    )
    lhs = dual_operator(compose(psi, phi)).matrix
    rhs = compose(dual_operator(phi), dual_operator(psi)).matrix
    mismatch = float(np.max(np.abs(lhs - rhs))) - 1e-12
    return TrialOutcome(max(slack, mismatch), (phi.matrix, psi.matrix))


@suite("class-duality")
def _class_duality(ctx: SuiteContext) -> TrialOutcome:
    """等距 φ 的对偶是余等距: c_surj(φ^△, n) ≤ 1 + 1e-3"""
    kind = ctx.pick((t2, hilb_max))
    k = int(ctx.rng.integers(1, 3))
    m = int(ctx.rng.integers(k, 4))
    phi = SeqOperator(kind(k), kind(m), random_isometry(m, k, ctx.rng))
    levels = min(3, ctx.n_max)
    record = classify(phi, levels, ctx.settings)
    slack = 0.0 if record.isometric else np.inf
    dual = dual_operator(phi)
    for n in range(1, levels + 1):
        c_surj, _ = surjectivity_constant(dual, n, ctx.settings)
        slack = max(slack, _excess(c_surj, 1.0, ctx.tolerance))
    return TrialOutcome(slack, (phi.matrix,))


@suite("compose-constants")
def _compose_constants(ctx: SuiteContext) -> TrialOutcome:
    """c_inj(ψφ) ≤ c_inj(ψ)·c_inj(φ)"""
    kinds = ctx.pick([(t2, t2, t2), (hilb_max,) * 3, (t2, t2, hilb_max), (t2, hilb_max, hilb_max)])
    dims = sorted(int(d) for d in ctx.rng.integers(1, 4, size=3))
    spaces = [kind(d) for kind, d in zip(kinds, dims)]
    phi = random_operator(spaces[0], spaces[1], ctx.rng)
    psi = random_operator(spaces[1], spaces[2], ctx.rng)
    n = ctx.level()
    c1, _ = injectivity_constant(phi, n, ctx.settings)
    c2, _ = injectivity_constant(psi, n, ctx.settings)
    c12, _ = injectivity_constant(compose(psi, phi), n, ctx.settings)
    bound = c1 * c2 * (1 + ctx.tolerance)
    slack = float(c12 - bound) if np.isfinite(bound) else 0.0
    return TrialOutcome(slack, (phi.matrix, psi.matrix))


# ----- 对偶与构造 -----


@suite("t2-dual")
def _t2_dual(ctx: SuiteContext) -> TrialOutcome:
    """(t₂ⁿ)^△ 的范数是 Frobenius 范数（配对路线）"""
    k = ctx.level(4)
    f = crandn((k, ctx.level()), ctx.rng)
    estimate = evaluate_dual(t2(k), f, ctx.settings, route="pairing")
    reference = float(np.linalg.norm(f))
    slack = max(
        _match_slack(estimate.lower, reference, ctx.tolerance),
        _match_slack(estimate.upper, reference, ctx.tolerance),
    )
    return TrialOutcome(slack, (f,))


@suite("t2-invertible")
def _t2_invertible(ctx: SuiteContext) -> TrialOutcome:
    """t₂ⁿ(X) 的分解可以限制为可逆 α；t₂ⁿ(ℂ) = ℓ₂ⁿ"""
    space = ctx.pick([t2(1), hilb_max(2)])
    x = ctx.element(space, ctx.level())
    free = t2n_norm(x, settings=ctx.settings)
    restricted = t2n_norm(x, settings=ctx.settings, invertible=True)
    slack = _match_slack(restricted.upper, free.upper, ctx.tolerance)
    if space.dim == 1:
        slack = max(slack, _match_slack(free.upper, float(np.linalg.norm(x.coords)), 1e-6))
    return TrialOutcome(slack, (x.coords,))


@suite("minmax-dual")
def _minmax_dual(ctx: SuiteContext) -> TrialOutcome:
    """min(E)^△ = max(E*)，max(E)^△ = min(E*)"""
    k = int(ctx.rng.integers(2, 4))
    ground = ctx.pick([lp(1, k), lp("inf", k), lp(2, k), opmatrix(2, 2)])
    minimal = ctx.pick([True, False])
    source = min_space(ground) if minimal else max_space(ground)
    target = max_space(dual_of(ground)) if minimal else min_space(dual_of(ground))
    f = crandn((ground.dim, ctx.level(3)), ctx.rng)
    slack = _overlap_slack(
        evaluate_dual(source, f, ctx.settings, route="pairing"),
        evaluate(target, f, ctx.settings),
        ctx.tolerance,
    )
    return TrialOutcome(slack, (f,))


@suite("l1-max")
def _l1_max(ctx: SuiteContext) -> TrialOutcome:
    """⊕₁{ℂ,…,ℂ} = max(ℓ₁ᵏ)"""
    k = int(ctx.rng.integers(2, 4))
    x = crandn((k, ctx.level(3)), ctx.rng)
    slack = _overlap_slack(
        evaluate(make_dsum_one([t2(1)] * k), x, ctx.settings),
        evaluate(max_space(lp(1, k)), x, ctx.settings),
        ctx.tolerance,
    )
    return TrialOutcome(slack, (x,))


@suite("sum-dual")
def _sum_dual(ctx: SuiteContext) -> TrialOutcome:
    """(⊕₁ X_λ)^△ = ⊕∞ X_λ^△"""
    options = [t2(2), hilb_max(2), min_space(lp("inf", 2))]
    children = [ctx.pick(options) for _ in range(int(ctx.rng.integers(2, 4)))]
    total = make_dsum_one(children)
    product = make_dsum_inf([dual_desc(c) for c in children])
    f = crandn((total.dim, ctx.level(3)), ctx.rng)
    slack = _overlap_slack(
        evaluate_dual(total, f, ctx.settings, route="pairing"),
        evaluate(product, f, ctx.settings),
        ctx.tolerance,
    )
    return TrialOutcome(slack, (f,))


@suite("quotient-coiso")
def _quotient_coiso(ctx: SuiteContext) -> TrialOutcome:
    """商映射收缩且 c_surj(π, n) ≤ 1 + 1e-3"""
    parent = ctx.pick([hilb_max(3), t2(3)])
    kernel = crandn((3, int(ctx.rng.integers(1, 3))), ctx.rng)
    pi = canonical_projection(make_quotient(parent, kernel))
    slack = _excess(sb_norm(pi, ctx.settings).upper, 1.0, 1e-6)
    for n in range(1, min(3, ctx.n_max) + 1):
        c_surj, _ = surjectivity_constant(pi, n, ctx.settings)
        slack = max(slack, _excess(c_surj, 1.0, ctx.tolerance))
    return TrialOutcome(slack, (kernel,))


@suite("tensor-cross")
def _tensor_cross(ctx: SuiteContext) -> TrialOutcome:
    """初等张量: 上界 ≤ ‖x‖‖y‖，下界 ≥ (1 − 2%)‖x‖‖y‖"""
    options = [t2(1), hilb_max(2), min_space(lp("inf", 2)), t2(2)]
    left, right = ctx.pick(options), ctx.pick(options)
    level = ctx.level(2)
    x, y = ctx.element(left, level), ctx.element(right, level)
    nx, ny = evaluate(left, x.coords, ctx.settings), evaluate(right, y.coords, ctx.settings)
    estimate = max_tensor_norm(tensor_from_elementary(x, y), ctx.settings)
    slack = max(
        float(estimate.upper - nx.upper * ny.upper - 1e-9),
        _excess((1 - ctx.tolerance) * nx.lower * ny.lower, estimate.lower, 0.0),
    )
    return TrialOutcome(slack, (x.coords, y.coords))


# ----- 自由 / 余自由 -----


@suite("free-universal")
def _free_universal(ctx: SuiteContext) -> TrialOutcome:
    """单位球元素 ↔ t₂ⁿ 出发的收缩，及余积诱导映射"""
    target = ctx.pick([t2(1), min_space(lp("inf", 2)), max_space(lp(1, 2)), hilb_max(2)])
    slack, coords = universal_trial(target, ctx.n_max, ctx.rng, ctx.settings)
    free = build_free(min(2, ctx.n_max), int(ctx.rng.integers(1, 3)))
    induced, matrix = induced_trial(free, target, ctx.rng, ctx.settings)
    return TrialOutcome(max(slack, induced), (coords, matrix))


@suite("cofree-dual")
def _cofree_dual(ctx: SuiteContext) -> TrialOutcome:
    """自由截断的对偶与余自由截断范数重叠"""
    levels = min(3, ctx.n_max)
    base = int(ctx.rng.integers(1, 3))
    free, cofree = build_free(levels, base), build_cofree(levels, base)
    f = crandn((free.space.dim, ctx.level(3)), ctx.rng)
    slack = _overlap_slack(
        evaluate_dual(free.space, f, ctx.settings, route="pairing"),
        evaluate(cofree.space, f, ctx.settings),
        ctx.tolerance,
    )
    return TrialOutcome(slack, (f,))


# ========== 5. 预算 ==========


@dataclass(frozen=True)
class SuiteBudget:
    trials: int = 20
    tolerance: float = 1e-6
    search: Dict[str, Any] = field(default_factory=dict)


@lru_cache(maxsize=8)
def _load_budgets(path: str) -> Tuple[Dict[str, Any], Dict[str, SuiteBudget]]:
    if not os.path.exists(path):
        logger.warning(f"⚠️ 套件预算文件不存在: {path}，使用默认值")
        return {}, {}
    with open(path, "r", encoding="utf-8") as f:
        data = ujson.load(f)
    defaults = data.get("search", {})
    budgets = {
        suite_id: SuiteBudget(
            trials=int(entry.get("trials", 20)),
            tolerance=float(entry.get("tolerance", 1e-6)),
            search=dict(entry.get("search", {})),
        )
        for suite_id, entry in data.get("suites", {}).items()
    }
    logger.debug(f"已加载套件预算 {path} (版本 {data.get('version')})")
    return defaults, budgets


def suite_budget(
    suite_id: str, tolerances: Optional[Dict[str, float]] = None
) -> Tuple[SuiteBudget, Dict[str, Any]]:
    """预算文件中的套件预算；tolerances（缺省 Config.TOLERANCE_OVERRIDES）覆盖容差"""
    defaults, budgets = _load_budgets(str(Config.SUITES_FILE))
    budget = budgets.get(suite_id, SuiteBudget())
    tolerances = Config.TOLERANCE_OVERRIDES if tolerances is None else tolerances
    if suite_id in tolerances:
        budget = replace(budget, tolerance=float(tolerances[suite_id]))
    return budget, defaults


def suite_settings(
    suite_id: str,
    seed: int,
    overrides: Optional[Dict[str, Any]] = None,
    tolerances: Optional[Dict[str, float]] = None,
) -> Tuple[SearchSettings, SuiteBudget]:
    """配置 → 预算文件默认 → 套件预算 → 命令行覆盖"""
    budget, defaults = suite_budget(suite_id, tolerances)
    settings = SearchSettings.from_config().replace(**defaults).replace(**budget.search)
    settings = settings.replace(seed=int(seed))
    if overrides:
        settings = settings.replace(**{k: v for k, v in overrides.items() if v is not None})
    return settings, budget


# ========== 6. 运行 ==========


def _run_trial(
    fn: SuiteFn,
    suite_id: str,
    trial: int,
    seed: int,
    n_max: int,
    settings: SearchSettings,
    tolerance: float,
    cancel: Optional[threading.Event] = None,
) -> Tuple[float, int, str]:
    rng, trial_seed = trial_rng(seed, trial)
    ctx = SuiteContext(rng=rng, n_max=n_max, settings=settings, tolerance=tolerance)
    try:
        with cancellation(cancel):
            outcome = fn(ctx)
    except TrialCancelled:
        return np.inf, trial_seed, "timeout"
    except Exception as e:
        logger.error(f"❌ 套件 {suite_id} 第 {trial} 次试验异常: {e}")
        return np.inf, trial_seed, "exception"
    slack = float(outcome.slack)
    if np.isnan(slack):
        slack = np.inf
    return slack, trial_seed, inputs_digest(*outcome.inputs)


@performance_monitor.track("run_suite")
async def run_suite_async(
    suite_id: str,
    trials: Optional[int] = None,
    seed: Optional[int] = None,
    n_max: Optional[int] = None,
    jobs: Optional[int] = None,
    overrides: Optional[Dict[str, Any]] = None,
    timeout: Optional[float] = None,
    tolerances: Optional[Dict[str, float]] = None,
) -> PropertyReport:
    """
    在线程池中并发运行试验；超时的试验记为松弛 +inf 的失败

    超时后置位取消事件，进行中的试验在下一次搜索重启前退出。
    """
    fn = get_suite(suite_id)
    seed = int(Config.SEED if seed is None else seed)
    n_max = int(Config.N_MAX if n_max is None else n_max)
    jobs = int(Config.JOBS if jobs is None else jobs)
    timeout = float(Config.SUITE_TIMEOUT if timeout is None else timeout)
    settings, budget = suite_settings(suite_id, seed, overrides, tolerances)
    trials = budget.trials if trials is None else int(trials)

    logger.info(f"▶️ 开始套件 {suite_id}: {trials} 次试验, seed={seed}, n_max={n_max}")
    started = time.perf_counter()
    loop = asyncio.get_running_loop()
    executor = ThreadPoolExecutor(max_workers=max(1, jobs), thread_name_prefix=f"suite-{suite_id}")
    cancel = threading.Event()
    futures = [
        loop.run_in_executor(
            executor, _run_trial, fn, suite_id, trial, seed, n_max, settings, budget.tolerance, cancel
        )
        for trial in range(trials)
    ]
    try:
        if futures:
            await Watchdog.protect(asyncio.wait(futures), timeout=timeout, name=suite_id)
    except SuiteTimeoutError:
        logger.error(f"⏰ 套件 {suite_id} 超时，未完成的试验记为失败")
    finally:
        cancel.set()
        executor.shutdown(wait=True, cancel_futures=True)

    failures: List[TrialFailure] = []
    worst = 0.0 if trials == 0 else -np.inf
    for trial, future in enumerate(futures):
        if future.done() and not future.cancelled():
            slack, trial_seed, digest = future.result()
        else:
            _, trial_seed = trial_rng(seed, trial)
            slack, digest = np.inf, "timeout"
        worst = max(worst, slack)
        if slack > 0:
            failures.append(TrialFailure(trial, trial_seed, digest, slack))

    report = PropertyReport(
        suite_id=suite_id,
        trials=trials,
        seed=seed,
        failures=tuple(failures),
        worst_slack=float(worst),
        elapsed_ms=int((time.perf_counter() - started) * 1000),
        config_digest=settings.digest(tolerance=budget.tolerance, n_max=n_max),
    )
    status = "✅" if report.passed else "❌"
    logger.info(
        f"{status} 套件 {suite_id} 完成: {len(failures)}/{trials} 失败, "
        f"最差松弛 {report.worst_slack:.3g}"
    )
    return report


def run_suite(
    suite_id: str,
    trials: Optional[int] = None,
    seed: Optional[int] = None,
    n_max: Optional[int] = None,
    **kwargs,
) -> PropertyReport:
    return asyncio.run(run_suite_async(suite_id, trials, seed, n_max, **kwargs))


async def run_all_async(
    trials: Optional[int] = None,
    seed: Optional[int] = None,
    n_max: Optional[int] = None,
    **kwargs,
) -> List[PropertyReport]:
    reports = []
    for suite_id in SUITES:
        reports.append(await run_suite_async(suite_id, trials, seed, n_max, **kwargs))
    return reports


def run_all(
    trials: Optional[int] = None,
    seed: Optional[int] = None,
    n_max: Optional[int] = None,
    **kwargs,
) -> List[PropertyReport]:
    return asyncio.run(run_all_async(trials, seed, n_max, **kwargs))

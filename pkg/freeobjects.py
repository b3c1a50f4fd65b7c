"""
自由 / 余自由对象的截断 - 构造、泛性质映射与构造性验证

自由对象: ⊕₁ over Λ of ⊕₁{t₂ⁿ : n ≤ N}；余自由对象: ⊕∞ over Λ of ⊕∞{ℓ₂ⁿ : n ≤ N}。
单元素的直和直接折叠为该元素。
"""

import logging
import time
from dataclasses import dataclass
from typing import List, Mapping, Optional, Tuple

import numpy as np

from config import Config, SearchSettings
from fault_tolerance import DimensionError, PreconditionError, StructureError
from matcore import crandn
from sqoperators import SeqOperator, amplify_apply, column_to_operator, sb_norm
from sqspaces import (
    ElementColumn,
    SeqSpaceDesc,
    dual_desc,
    evaluate,
    evaluate_dual,
    hilb_max,
    same_space,
    t2,
)

logger = logging.getLogger("OssCalc.FreeObjects")

UNIT_BALL_TOL = 1e-9
CONTRACTIVE_TOL = 1e-3


@dataclass(frozen=True)
class Leaf:
    """截断中的一个 t₂ⁿ（或 ℓ₂ⁿ）分量"""

    base_point: int
    level: int
    offset: int


@dataclass(frozen=True, eq=False)
class FreeTruncation:
    max_level: int
    base_size: int
    space: SeqSpaceDesc
    leaves: Tuple[Leaf, ...]


@dataclass(frozen=True, eq=False)
class CofreeTruncation:
    max_level: int
    base_size: int
    space: SeqSpaceDesc
    leaves: Tuple[Leaf, ...]


def _sum(tag: str, children: List[SeqSpaceDesc]) -> SeqSpaceDesc:
    return children[0] if len(children) == 1 else SeqSpaceDesc(tag, children=tuple(children))


def _truncation(max_level: int, base_size: int, tag: str, leaf_space):
    if max_level < 1 or base_size < 1:
        raise DimensionError(f"截断层数与基大小必须 ≥ 1，实际 N={max_level}, |Λ|={base_size}")
    block = max_level * (max_level + 1) // 2
    leaves = tuple(
        Leaf(lam, n, lam * block + n * (n - 1) // 2)
        for lam in range(base_size)
        for n in range(1, max_level + 1)
    )
    inner = [_sum(tag, [leaf_space(n) for n in range(1, max_level + 1)]) for _ in range(base_size)]
    return _sum(tag, inner), leaves


def build_free(max_level: int, base_size: int = 1) -> FreeTruncation:
    space, leaves = _truncation(max_level, base_size, "dsum_one", t2)
    logger.debug(f"构造自由截断 N={max_level}, |Λ|={base_size}: 维数 {space.dim}")
    return FreeTruncation(max_level, base_size, space, leaves)


def build_cofree(max_level: int, base_size: int = 1) -> CofreeTruncation:
    space, leaves = _truncation(max_level, base_size, "dsum_inf", hilb_max)
    logger.debug(f"构造余自由截断 N={max_level}, |Λ|={base_size}: 维数 {space.dim}")
    return CofreeTruncation(max_level, base_size, space, leaves)


def leaf_markers(truncation) -> List[Tuple[Leaf, np.ndarray]]:
    """每个分量的标记元素 I_n，嵌入整个截断的坐标"""
    markers = []
    for leaf in truncation.leaves:
        column = np.zeros((truncation.space.dim, leaf.level), dtype=np.complex128)
        column[leaf.offset : leaf.offset + leaf.level] = np.eye(leaf.level)
        markers.append((leaf, column))
    return markers


# ========== 泛性质 ==========


def _resolve(settings: Optional[SearchSettings]) -> SearchSettings:
    return settings if settings is not None else SearchSettings.from_config()


def _require_unit_ball(upper: float, what: str):
    if upper > 1 + UNIT_BALL_TOL:
        raise PreconditionError(f"{what} 的范数上界 {upper:.12g} 超出单位球")


def universal_map(x: ElementColumn, settings: Optional[SearchSettings] = None) -> SeqOperator:
    """
    x ∈ Ball(X⁽ⁿ⁾) ↦ 唯一的收缩 ψ: t₂ⁿ → X，ψ⁽ⁿ⁾(I_n) = x

    矩阵就是 x 的坐标。
    """
    settings = _resolve(settings)
    _require_unit_ball(evaluate(x.space, x.coords, settings).upper, "元素列")
    return column_to_operator(x)


def induced_map(
    free: FreeTruncation,
    target: SeqSpaceDesc,
    values: Mapping[Tuple[int, int], ElementColumn],
    settings: Optional[SearchSettings] = None,
) -> SeqOperator:
    """
    余积泛性质: 每个分量 (λ, n) 指定 x_{λ,n} ∈ Ball(X⁽ⁿ⁾)，
    得到唯一的收缩 Ψ: F → X，使 Ψ⁽ⁿ⁾(I_n 在分量 (λ, n)) = x_{λ,n}
    """
    settings = _resolve(settings)
    blocks = []
    for leaf in free.leaves:
        x = values.get((leaf.base_point, leaf.level))
        if x is None:
            raise StructureError(f"缺少分量 ({leaf.base_point}, {leaf.level}) 的取值")
        if not same_space(x.space, target) or x.level != leaf.level:
            raise DimensionError(f"分量 ({leaf.base_point}, {leaf.level}) 的取值不在 {target.describe()} 的第 {leaf.level} 层")
        _require_unit_ball(evaluate(target, x.coords, settings).upper, f"分量 ({leaf.base_point}, {leaf.level})")
        blocks.append(x.coords)
    return SeqOperator(free.space, target, np.hstack(blocks))


def cofree_induced_map(
    cofree: CofreeTruncation,
    source: SeqSpaceDesc,
    functionals: Mapping[Tuple[int, int], ElementColumn],
    settings: Optional[SearchSettings] = None,
) -> SeqOperator:
    """
    积泛性质: 每个分量 (λ, n) 给出 f_{λ,n} ∈ Ball((X^△)⁽ⁿ⁾)，
    即 t₂ⁿ → X^△ 的收缩；取对偶得 X → ℓ₂ⁿ，合成 Φ: X → C
    """
    settings = _resolve(settings)
    rows = []
    for leaf in cofree.leaves:
        f = functionals.get((leaf.base_point, leaf.level))
        if f is None:
            raise StructureError(f"缺少分量 ({leaf.base_point}, {leaf.level}) 的泛函")
        if not same_space(f.space, dual_desc(source)) or f.level != leaf.level:
            raise DimensionError(f"分量 ({leaf.base_point}, {leaf.level}) 的泛函不在 {source.describe()} 的对偶中")
        upper = evaluate_dual(source, f.coords, settings.replace(lower_search=False)).upper
        _require_unit_ball(upper, f"泛函 ({leaf.base_point}, {leaf.level})")
        rows.append(f.coords.T)
    return SeqOperator(source, cofree.space, np.vstack(rows))


# ========== 构造性验证 ==========


def universal_trial(
    target: SeqSpaceDesc,
    max_level: int,
    rng: np.random.Generator,
    settings: SearchSettings,
) -> Tuple[float, np.ndarray]:
    """
    一次泛性质试验: 随机单位球元素 x（层数 ≤ N）→ ψ = universal_map(x)，
    检查 ψ⁽ⁿ⁾(I_n) = x（零容差）、ψ 由基上取值唯一确定、sb 上界 ≤ 1 + 1e-3。
    返回 (松弛, x 的坐标)，松弛 ≤ 0 即通过。
    """
    from harness import gen_random_element

    level = int(rng.integers(1, max_level + 1))
    x = gen_random_element(target, level, rng, normalize=True, settings=settings)
    psi = universal_map(x, settings)
    image = amplify_apply(psi, ElementColumn(psi.domain, np.eye(level)))
    exact = 0.0 if np.array_equal(image.coords, x.coords) else np.inf
    unique = 0.0 if basis_determines(psi, x, rng) else np.inf
    contractive = sb_norm(psi, settings.replace(lower_search=False)).upper - (1 + CONTRACTIVE_TOL)
    return max(exact, unique, contractive), x.coords


def basis_determines(psi: SeqOperator, x: ElementColumn, rng: np.random.Generator) -> bool:
    """
    ψ 在 t₂ⁿ 的每个基向量 e_j 上取 x 的第 j 列；
    任何扰动 ψ + Δ（Δ ≠ 0）都会改变 (ψ + Δ)⁽ⁿ⁾(I_n)
    """
    level = psi.domain.dim
    for j in range(level):
        e_j = np.zeros((level, 1), dtype=np.complex128)
        e_j[j, 0] = 1.0
        column = amplify_apply(psi, ElementColumn(psi.domain, e_j))
        if not np.array_equal(column.coords[:, 0], x.coords[:, j]):
            return False

    delta = crandn(psi.matrix.shape, rng)
    if not np.any(delta):
        return False
    perturbed = SeqOperator(psi.domain, psi.codomain, psi.matrix + delta)
    moved = amplify_apply(perturbed, ElementColumn(psi.domain, np.eye(level)))
    return not np.array_equal(moved.coords, x.coords)


def induced_trial(
    free: FreeTruncation,
    target: SeqSpaceDesc,
    rng: np.random.Generator,
    settings: SearchSettings,
) -> Tuple[float, np.ndarray]:
    """余积版本: 每个分量取随机单位球元素，Ψ 在各标记 I_n 上的取值必须逐项相等"""
    from harness import gen_random_element

    values = {
        (leaf.base_point, leaf.level): gen_random_element(
            target, leaf.level, rng, normalize=True, settings=settings
        )
        for leaf in free.leaves
    }
    big_psi = induced_map(free, target, values, settings)
    exact = 0.0
    for leaf, marker in leaf_markers(free):
        image = amplify_apply(big_psi, ElementColumn(free.space, marker))
        if not np.array_equal(image.coords, values[(leaf.base_point, leaf.level)].coords):
            exact = np.inf
    contractive = sb_norm(big_psi, settings.replace(lower_search=False)).upper - (1 + CONTRACTIVE_TOL)
    return max(exact, contractive), big_psi.matrix


def check_universal_property(
    free: FreeTruncation,
    target: SeqSpaceDesc,
    trials: int,
    seed: Optional[int] = None,
    settings: Optional[SearchSettings] = None,
):
    """
    对 target 跑 trials 次 universal_trial（层数 ≤ free.max_level），
    汇总为 suite_id 为 "free-universal" 的 PropertyReport
    """
    from harness import PropertyReport, TrialFailure, trial_rng
    from utils import inputs_digest

    settings = _resolve(settings)
    seed = int(Config.SEED if seed is None else seed)
    started = time.perf_counter()
    failures = []
    worst = 0.0 if trials <= 0 else -np.inf
    for trial in range(max(0, int(trials))):
        rng, trial_seed = trial_rng(seed, trial)
        slack, coords = universal_trial(target, free.max_level, rng, settings)
        worst = max(worst, slack)
        if slack > 0:
            failures.append(TrialFailure(trial, trial_seed, inputs_digest(coords), float(slack)))
    if failures:
        logger.warning(f"⚠️ {target.describe()} 上 {len(failures)}/{trials} 次泛性质试验失败")
    return PropertyReport(
        suite_id="free-universal",
        trials=max(0, int(trials)),
        seed=seed,
        failures=tuple(failures),
        worst_slack=float(worst),
        elapsed_ms=int((time.perf_counter() - started) * 1000),
        config_digest=settings.digest(tolerance=CONTRACTIVE_TOL, n_max=free.max_level),
    )

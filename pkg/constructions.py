"""
构造 - 对偶、子空间、商空间、⊕∞ / ⊕₁ 和，以及极大张量积范数的区间估计
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from ascent import pairing_ascent, restart_rng, retract_by, salt_of
from config import SearchSettings
from fault_tolerance import DescriptorError, DimensionError, handle_evaluation_errors
from matcore import as_cmatrix, crandn, glue_right, op_norm, pad_columns
from performance import performance_monitor
from sqspaces import (
    ElementColumn,
    NormEstimate,
    SeqSpaceDesc,
    Witness,
    dual_desc,
    dual_upper,
    evaluate,
    same_space,
)

logger = logging.getLogger("OssCalc.Constructions")

ALTERNATING_ROUNDS = 8


# ========== 1. 描述符构造 ==========


def make_dual(space: SeqSpaceDesc) -> SeqSpaceDesc:
    """X^△（惰性：不构造对偶基，范数走对偶恒等式或配对）"""
    return dual_desc(space)


def make_subspace(space: SeqSpaceDesc, basis) -> SeqSpaceDesc:
    return SeqSpaceDesc("subspace", children=(space,), basis=as_cmatrix(basis))


def make_quotient(space: SeqSpaceDesc, kernel_basis) -> SeqSpaceDesc:
    """X/X₀；kernel_basis 可以是 0 列（平凡核）"""
    kernel = np.asarray(kernel_basis, dtype=np.complex128)
    if kernel.size == 0:
        kernel = np.zeros((space.dim, 0), dtype=np.complex128)
    return SeqSpaceDesc("quotient", children=(space,), basis=kernel)


def _children(children: Sequence[SeqSpaceDesc]) -> Tuple[SeqSpaceDesc, ...]:
    children = tuple(children)
    if not children:
        raise DescriptorError("直和至少需要一个分量")
    return children


def make_dsum_inf(children: Sequence[SeqSpaceDesc]) -> SeqSpaceDesc:
    return SeqSpaceDesc("dsum_inf", children=_children(children))


def make_dsum_one(children: Sequence[SeqSpaceDesc]) -> SeqSpaceDesc:
    return SeqSpaceDesc("dsum_one", children=_children(children))


# ========== 2. 张量元素 ==========


@dataclass(frozen=True, eq=False)
class TensorTerm:
    """α(x ⊗ y)：x、y 同为 l 层，α 为 n×l²"""

    alpha: np.ndarray
    x: ElementColumn
    y: ElementColumn


@dataclass(frozen=True, eq=False)
class TensorElement:
    """
    u = Σ_i α_i(x_i ⊗ y_i) ∈ (X ⊗ Y)⁽ⁿ⁾

    x ⊗ y 是 l² 层的列 (x_j ⊗ y_k)，按 (j, k) 行优先排列，
    坐标 kron(X, Y)；因此 u 的坐标为 Σ kron(X_i, Y_i)·α_iᵀ。
    """

    left: SeqSpaceDesc
    right: SeqSpaceDesc
    level: int
    terms: Tuple[TensorTerm, ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if self.level < 1:
            raise DimensionError(f"层数必须 ≥ 1，实际 {self.level}")
        for index, term in enumerate(self.terms):
            if not same_space(term.x.space, self.left) or not same_space(term.y.space, self.right):
                raise DimensionError(f"第 {index} 项的因子不在 X、Y 中")
            if term.x.level != term.y.level:
                raise DimensionError(
                    f"第 {index} 项: x 层数 {term.x.level} ≠ y 层数 {term.y.level}"
                )
            expected = (self.level, term.x.level**2)
            if term.alpha.shape != expected:
                raise DimensionError(f"第 {index} 项: α 形状 {term.alpha.shape} 应为 {expected}")

    @property
    def dim(self) -> int:
        return self.left.dim * self.right.dim

    @property
    def coords(self) -> np.ndarray:
        total = np.zeros((self.dim, self.level), dtype=np.complex128)
        for term in self.terms:
            total += np.kron(term.x.coords, term.y.coords) @ term.alpha.T
        return total


def tensor_term(alpha, x: ElementColumn, y: ElementColumn) -> TensorTerm:
    return TensorTerm(as_cmatrix(alpha), x, y)


def tensor_from_elementary(x: ElementColumn, y: ElementColumn) -> TensorElement:
    """x ⊗ y 本身作为 l² 层元素（α = I）"""
    if x.level != y.level:
        raise DimensionError(f"x 层数 {x.level} ≠ y 层数 {y.level}")
    size = x.level**2
    term = tensor_term(np.eye(size), x, y)
    return TensorElement(x.space, y.space, size, (term,))


# ========== 3. 极大张量范数 ==========


def _representation_upper(
    u: TensorElement, settings: SearchSettings
) -> Tuple[float, str]:
    """
    ‖[α₁/t₁,…,α_k/t_k]‖·(Σ t_i² c_i²)^{1/2}，c_i = ‖x_i‖·‖y_i‖

    先试 t = 1 与平衡 t_i = (‖α_i‖/c_i)^{1/2}，再用 Nelder–Mead 在 log t 上细化。
    """
    upper_settings = settings.replace(lower_search=False)
    terms = [
        (t.alpha, evaluate(u.left, t.x.coords, upper_settings).upper
         * evaluate(u.right, t.y.coords, upper_settings).upper)
        for t in u.terms
    ]
    terms = [(alpha, c) for alpha, c in terms if c > 0 and np.any(alpha)]
    if not terms:
        return 0.0, "zero_representation"

    alphas = [alpha for alpha, _ in terms]
    c = np.array([c for _, c in terms])

    def cost(log_t: np.ndarray) -> float:
        t = np.exp(log_t)
        glued = glue_right([alpha / ti for alpha, ti in zip(alphas, t)])
        return op_norm(glued) * float(np.linalg.norm(t * c))

    balanced = 0.5 * np.log(np.array([op_norm(a) for a in alphas]) / c)
    candidates = {"representation": cost(np.zeros(len(c))), "balanced": cost(balanced)}
    if len(c) > 1:
        result = minimize(
            cost,
            balanced,
            method="Nelder-Mead",
            options={"maxiter": settings.quotient_iterations, "xatol": 1e-10, "fatol": 1e-14},
        )
        candidates["rescaled"] = min(float(result.fun), candidates["balanced"])
    certificate = min(candidates, key=candidates.get)
    return candidates[certificate], f"tensor_{certificate}"


def _partial_pairing(tensor: np.ndarray, other: np.ndarray, side: str) -> np.ndarray:
    """
    固定一侧泛函后的配对矩阵

    tensor[a, b, i] 是 u_i 的坐标；side="left" 时返回 Z[a, (i, t)] = Σ_b tensor[a,b,i]·G[b,t]
    """
    if side == "left":
        z = np.einsum("abi,bt->ait", tensor, other)
    else:
        z = np.einsum("abi,as->bis", tensor, other)
    return z.reshape(z.shape[0], -1)


def _kron_value(coords: np.ndarray, f: np.ndarray, g: np.ndarray) -> float:
    return float(np.linalg.norm(coords.T @ np.kron(f, g)))


@performance_monitor.track("max_tensor_norm")
@handle_evaluation_errors("max_tensor_norm")
def max_tensor_norm(
    u: TensorElement, settings: Optional[SearchSettings] = None
) -> NormEstimate:
    """
    ‖u‖ 在 X ⊗_Max Y 中的区间

    上界来自给定表示（只做重标，不做全局搜索）；下界为初等泛函对
    (f, g) ∈ (X^△)⁽ᵐ¹⁾ × (Y^△)⁽ᵐ²⁾ 单位球上的 ‖uᵀ·kron(f, g)‖_F，交替上升。
    """
    settings = settings if settings is not None else SearchSettings.from_config()
    coords = u.coords
    if not np.any(coords):
        return NormEstimate.zero()

    upper, certificate = _representation_upper(u, settings)
    if not settings.lower_search:
        return NormEstimate.build(0.0, upper, Witness.zero(), certificate)

    p, q, n = u.left.dim, u.right.dim, u.level
    tensor = coords.reshape(p, q, n)
    retract_f = retract_by(lambda f: dual_upper(u.left, f, settings))
    retract_g = retract_by(lambda g: dual_upper(u.right, g, settings))
    inner = settings.replace(ascent_restarts=1)
    salt = salt_of("constructions.tensor")

    seed_pairs: List[Tuple[np.ndarray, np.ndarray]] = []
    for term in u.terms:
        fx = evaluate(u.left, term.x.coords, settings).witness
        gy = evaluate(u.right, term.y.coords, settings).witness
        if fx.kind == "pairing" and gy.kind == "pairing":
            seed_pairs.append((fx.data["W"], gy.data["W"]))
    m1 = max([n] + [f.shape[1] for f, _ in seed_pairs])
    m2 = max([n] + [g.shape[1] for _, g in seed_pairs])
    seed_pairs = [(pad_columns(f, m1), pad_columns(g, m2)) for f, g in seed_pairs]
    for restart in range(max(1, settings.ascent_restarts // 8)):
        rng = restart_rng(settings, salt, restart)
        seed_pairs.append((crandn((p, m1), rng), crandn((q, m2), rng)))

    best, best_f, best_g = 0.0, None, None
    for f0, g0 in seed_pairs:
        f, g = retract_f(f0), retract_g(g0)
        if f is None or g is None:
            continue
        # 不变量: value = ‖uᵀ·kron(f, g)‖_F 对当前 (f, g) 成立
        value = _kron_value(coords, f, g)
        for _ in range(ALTERNATING_ROUNDS):
            improved = False
            v1, f1 = pairing_ascent(
                _partial_pairing(tensor, g, "left"), retract_f, [f], m1, inner, salt
            )
            if f1 is not None and v1 > value * (1 + 1e-12):
                f, value, improved = f1, _kron_value(coords, f1, g), True
            v2, g1 = pairing_ascent(
                _partial_pairing(tensor, f, "right"), retract_g, [g], m2, inner, salt
            )
            if g1 is not None and v2 > value * (1 + 1e-12):
                g, value, improved = g1, _kron_value(coords, f, g1), True
            if not improved:
                break
        if value > best:
            best, best_f, best_g = value, f, g

    witness = Witness.pairing(np.kron(best_f, best_g)) if best_f is not None else Witness.zero()
    estimate = NormEstimate.build(best, upper, witness, certificate)
    if estimate.gap > 0.05 * max(estimate.upper, 1e-300):
        logger.debug(f"张量范数区间较宽: [{estimate.lower:.6g}, {estimate.upper:.6g}]")
    return estimate

"""
序列有界算子 - 放大、Smith 引理给出的 sb 范数、对偶算子、t₂ⁿ 列识别、单射/满射常数
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from ascent import pairing_ascent, restart_rng, retract_by, salt_of
from config import SearchSettings
from fault_tolerance import DimensionError, StructureError, handle_evaluation_errors
from ground import ground_op_norm
from matcore import as_cmatrix, crandn, numerical_rank, pad_columns, singular_values, svd
from performance import performance_monitor
from sqspaces import (
    ElementColumn,
    NormEstimate,
    SeqSpaceDesc,
    Witness,
    amp_upper,
    dual_desc,
    dual_upper,
    evaluate,
    is_maximal,
    is_minimal,
    level1_ground,
    same_space,
    structure_kind,
    t2,
)

logger = logging.getLogger("OssCalc.SqOperators")

FLAG_TOL = 1e-6
ALTERNATING_ROUNDS = 8


@dataclass(frozen=True, eq=False)
class SeqOperator:
    """φ: X → Y，由底空间矩阵给出（到达域维数 × 定义域维数）"""

    domain: SeqSpaceDesc
    codomain: SeqSpaceDesc
    matrix: np.ndarray

    def __post_init__(self):
        matrix = as_cmatrix(self.matrix)
        if matrix.shape != (self.codomain.dim, self.domain.dim):
            raise DimensionError(
                f"算子矩阵形状 {matrix.shape} 与 {self.codomain.dim}×{self.domain.dim} 不符"
            )
        object.__setattr__(self, "matrix", matrix)

    def describe(self) -> str:
        return f"{self.domain.describe()} → {self.codomain.describe()}"


def _resolve(settings: Optional[SearchSettings]) -> SearchSettings:
    return settings if settings is not None else SearchSettings.from_config()


# ========== 1. 基本构造 ==========


def amplify_apply(phi: SeqOperator, x: ElementColumn) -> ElementColumn:
    """φ⁽ⁿ⁾(x) = (φ(x_i))_i"""
    if not same_space(x.space, phi.domain):
        raise StructureError(
            f"元素所在空间 {x.space.describe()} 不是算子定义域 {phi.domain.describe()}"
        )
    return ElementColumn(phi.codomain, phi.matrix @ x.coords)


def compose(psi: SeqOperator, phi: SeqOperator) -> SeqOperator:
    """ψ∘φ"""
    if not same_space(phi.codomain, psi.domain):
        raise StructureError(
            f"无法复合: {phi.codomain.describe()} ≠ {psi.domain.describe()}"
        )
    return SeqOperator(phi.domain, psi.codomain, psi.matrix @ phi.matrix)


def identity_operator(space: SeqSpaceDesc) -> SeqOperator:
    return SeqOperator(space, space, np.eye(space.dim, dtype=np.complex128))


def dual_operator(phi: SeqOperator) -> SeqOperator:
    """φ^△: Y^△ → X^△，双线性配对下矩阵为 Φᵀ"""
    return SeqOperator(dual_desc(phi.codomain), dual_desc(phi.domain), phi.matrix.T)


def column_to_operator(x: ElementColumn) -> SeqOperator:
    """x ↦ ψ: t₂ⁿ → X，ψ(ξ) = Σ ξ_i x_i"""
    return SeqOperator(t2(x.level), x.space, x.coords)


def operator_to_column(psi: SeqOperator) -> ElementColumn:
    """column_to_operator 的逆: x = ψ⁽ⁿ⁾(I_n)"""
    if structure_kind(psi.domain) != "spec" or psi.domain.tag not in ("t2", "min"):
        raise StructureError(f"定义域必须是 t₂ⁿ，实际 {psi.domain.describe()}")
    return ElementColumn(psi.codomain, psi.matrix)


def canonical_projection(quotient: SeqSpaceDesc) -> SeqOperator:
    """X → X/X₀，陪集坐标取 Cᴴv"""
    if quotient.tag != "quotient":
        raise StructureError("canonical_projection 需要商空间")
    return SeqOperator(quotient.child, quotient, quotient.complement.conj().T)


def canonical_inclusion(subspace: SeqSpaceDesc) -> SeqOperator:
    """X₀ → X，矩阵即子空间基"""
    if subspace.tag != "subspace":
        raise StructureError("canonical_inclusion 需要子空间")
    return SeqOperator(subspace, subspace.child, subspace.basis)


def _block_matrix(space: SeqSpaceDesc, index: int) -> Tuple[SeqSpaceDesc, np.ndarray]:
    if space.tag not in ("dsum_inf", "dsum_one"):
        raise StructureError("需要直和空间")
    if not 0 <= index < len(space.children):
        raise DimensionError(f"分量下标 {index} 越界")
    child, rows = list(space.blocks())[index]
    block = np.zeros((space.dim, child.dim), dtype=np.complex128)
    block[rows] = np.eye(child.dim)
    return child, block


def coproduct_injection(space: SeqSpaceDesc, index: int) -> SeqOperator:
    child, block = _block_matrix(space, index)
    return SeqOperator(child, space, block)


def product_projection(space: SeqSpaceDesc, index: int) -> SeqOperator:
    child, block = _block_matrix(space, index)
    return SeqOperator(space, child, block.T)


# ========== 2. 放大算子范数 ==========


def _closed_form(phi: SeqOperator, n: int):
    """
    frob/spec 结构对的闭式 ‖φ⁽ⁿ⁾‖ 及达到它的 (X, G)

    spec→frob 为前 min(n, rank) 个奇异值的 ℓ₂ 范数，其余三种为 σ_max。
    """
    dk, ck = structure_kind(phi.domain), structure_kind(phi.codomain)
    if dk is None or ck is None:
        return None
    u, s, vh = svd(phi.matrix)
    m = min(n, s.size) if dk == "spec" and ck == "frob" else 1
    value = float(np.linalg.norm(s[:m]))
    x = pad_columns(vh[:m, :].conj().T, n)[:, :n]
    g = np.conj(u[:, :m]) if ck == "frob" else np.conj(u[:, :1])
    return value, f"closed_form_{dk}_{ck}", x, g


def _upper_certificates(
    phi: SeqOperator, n: int, settings: SearchSettings, closed_forms: bool
) -> Dict[str, float]:
    dom, cod, mat = phi.domain, phi.codomain, phi.matrix
    quick = settings.upper_only()
    nested = settings.replace(lower_search=False)
    uppers: Dict[str, float] = {}

    gdom, gcod = level1_ground(dom), level1_ground(cod)
    if (is_minimal(cod) or is_maximal(dom)) and gdom is not None and gcod is not None:
        # 到 min 或从 max 出发的算子 ‖φ‖_sb = ‖φ‖
        uppers["level_one_reduction"] = ground_op_norm(
            mat, gdom, gcod, restarts=0, steps=0
        ).upper

    if dom.tag == "t2" or (dom.tag == "min" and structure_kind(dom) == "spec"):
        # ‖ψ‖_sb = ‖ψ⁽ᵐ⁾(I_m)‖
        uppers["t2_column"] = evaluate(cod, mat, settings.replace(lower_search=False)).upper

    if dom.tag == "dsum_one":
        uppers["coproduct"] = max(
            sb_norm(SeqOperator(child, cod, mat[:, rows]), nested).upper
            for child, rows in dom.blocks()
        )

    if cod.tag == "dsum_inf":
        uppers["product"] = max(
            amp_op_norm(SeqOperator(dom, child, mat[rows, :]), n, nested).upper
            for child, rows in cod.blocks()
        )

    u, s, vh = svd(mat)
    uppers["rank_one"] = float(
        sum(
            s[r] * amp_upper(cod, u[:, r], quick) * dual_upper(dom, vh[r, :], quick)
            for r in range(s.size)
            if s[r] > 0
        )
    )
    return uppers


def _alternating_lower(
    phi: SeqOperator, n: int, settings: SearchSettings, seeds: List[np.ndarray]
) -> Tuple[float, Optional[np.ndarray], Optional[np.ndarray]]:
    """
    交替上升: 固定 X 求到达域范数见证 G，再固定 G 在定义域球上最大化 ‖GᵀΦX‖_F
    """
    dom, cod, mat = phi.domain, phi.codomain, phi.matrix
    retract = retract_by(lambda x: amp_upper(dom, x, settings))
    inner = settings.replace(ascent_restarts=1)
    salt = salt_of("sqoperators.alternating")
    best, best_x, best_g = 0.0, None, None

    restarts = max(settings.ascent_restarts, len(seeds))
    for restart in range(restarts):
        start = seeds[restart] if restart < len(seeds) else crandn(
            (dom.dim, n), restart_rng(settings, salt, restart)
        )
        x = retract(start)
        if x is None:
            continue
        # 不变量: value = ‖(ΦX)ᵀG‖_F 对当前 (x, g) 成立
        value, g = 0.0, None
        for _ in range(ALTERNATING_ROUNDS):
            image = evaluate(cod, mat @ x, settings)
            if image.witness.kind == "pairing":
                g_new = image.witness.data["W"]
                current = float(np.linalg.norm((mat @ x).T @ g_new))
                if current > value * (1 + 1e-12):
                    value, g = current, g_new
            if g is None:
                break
            new_value, x_new = pairing_ascent(mat.T @ g, retract, [x], n, inner, salt)
            if x_new is None or new_value <= value * (1 + 1e-12):
                break
            x, value = x_new, new_value
        if g is not None and value > best:
            best, best_x, best_g = value, x, g
    return best, best_x, best_g


@performance_monitor.track("amp_op_norm")
@handle_evaluation_errors("amp_op_norm")
def amp_op_norm(
    phi: SeqOperator,
    n: int,
    settings: Optional[SearchSettings] = None,
    closed_forms: bool = True,
) -> NormEstimate:
    """
    ‖φ⁽ⁿ⁾‖

    上界取所有可用证书的最小值；下界为算子见证 (X, G)：
    X 在定义域 n 层单位球内，G 在到达域对偶球内，值 ‖(ΦX)ᵀG‖_F。
    """
    settings = _resolve(settings)
    if n < 1:
        raise DimensionError(f"层数必须 ≥ 1，实际 {n}")
    scale = float(np.linalg.norm(phi.matrix))
    if scale == 0.0:
        return NormEstimate.zero("zero_operator")
    phi = SeqOperator(phi.domain, phi.codomain, phi.matrix / scale)

    uppers = _upper_certificates(phi, n, settings, closed_forms)
    lower, witness = 0.0, Witness.zero()
    closed = _closed_form(phi, n) if closed_forms else None
    if closed is not None:
        value, label, x, g = closed
        uppers[label] = value
        lower = float(np.linalg.norm((phi.matrix @ x).T @ g))
        witness = Witness("operator", {"X": x, "G": g})

    if settings.lower_search and closed is None:
        u, s, vh = svd(phi.matrix)
        r = max(1, min(n, numerical_rank(phi.matrix)))
        seeds = [pad_columns(vh[:r, :].conj().T, n)[:, :n]]
        gdom, gcod = level1_ground(phi.domain), level1_ground(phi.codomain)
        if gdom is not None and gcod is not None:
            # 一层范数化向量
            vector = ground_op_norm(phi.matrix, gdom, gcod, restarts=2).vector
            seeds.append(pad_columns(vector.reshape(-1, 1), n)[:, :n])
        value, x, g = _alternating_lower(phi, n, settings, seeds)
        if x is not None and value > lower:
            lower, witness = value, Witness("operator", {"X": x, "G": g})

    certificate = min(uppers, key=uppers.get)
    logger.debug(f"{phi.describe()} 第 {n} 层: 上界证书 {certificate}")
    return NormEstimate.build(lower, uppers[certificate], witness, certificate).scaled(scale)


def sb_norm(phi: SeqOperator, settings: Optional[SearchSettings] = None, **kwargs) -> NormEstimate:
    """‖φ‖_sb = ‖φ⁽ᵈ⁾‖，d 为到达域维数"""
    d = phi.codomain.dim
    return amp_op_norm(phi, d, settings, **kwargs).at_level(d)


def replay_operator_witness(phi: SeqOperator, estimate: NormEstimate) -> float:
    """用 (X, G) 见证复现算子范数下界"""
    witness = estimate.witness
    if witness.kind == "zero":
        return 0.0
    if witness.kind != "operator":
        raise StructureError(f"见证类型 {witness.kind} 不是算子见证")
    x, g = witness.data["X"], witness.data["G"]
    return float(np.linalg.norm((phi.matrix @ x).T @ g))


# ========== 3. 单射 / 满射常数 ==========


@dataclass(frozen=True)
class LevelClassification:
    level: int
    norm: NormEstimate
    c_inj: float
    c_inj_certified: bool
    c_surj: float
    c_surj_certified: bool
    contractive: bool
    isometric: bool
    coisometric: bool


@dataclass(frozen=True)
class Classification:
    operator: str
    levels: Tuple[LevelClassification, ...]

    @property
    def isometric(self) -> bool:
        return all(level.isometric for level in self.levels)

    @property
    def coisometric(self) -> bool:
        return all(level.coisometric for level in self.levels)


def _injectivity_closed_form(phi: SeqOperator) -> Optional[float]:
    """frob/spec 结构对（frob→spec 除外）: inf ‖φx‖/‖x‖ = σ_min(Φ)"""
    dk, ck = structure_kind(phi.domain), structure_kind(phi.codomain)
    if dk is None or ck is None or (dk, ck) == ("frob", "spec"):
        return None
    s = singular_values(phi.matrix)
    return float(s[phi.domain.dim - 1])


def injectivity_constant(
    phi: SeqOperator, n: int, settings: Optional[SearchSettings] = None
) -> Tuple[float, bool]:
    """
    c_inj(n) = (inf_{‖x‖=1} ‖φ⁽ⁿ⁾x‖)⁻¹，返回 (常数, 是否闭式)

    非闭式情形用 Nelder–Mead 最小化 upper(φx)/upper(x)，报告原始下确界估计。
    """
    settings = _resolve(settings)
    dom, cod, mat = phi.domain, phi.codomain, phi.matrix
    if numerical_rank(mat) < dom.dim:
        return np.inf, True

    closed = _injectivity_closed_form(phi)
    if closed is not None:
        return 1.0 / closed, True

    quick = settings.upper_only()
    size = dom.dim * n

    def unpack(theta: np.ndarray) -> np.ndarray:
        return (theta[:size] + 1j * theta[size:]).reshape(dom.dim, n)

    def ratio(theta: np.ndarray) -> float:
        x = unpack(theta)
        denominator = amp_upper(dom, x, quick)
        if denominator <= 0:
            return np.inf
        return amp_upper(cod, mat @ x, quick) / denominator

    _, _, vh = svd(mat)
    weakest = pad_columns(vh[-1:, :].conj().T, n)
    salt = salt_of("sqoperators.injectivity")
    best = np.inf
    for restart in range(settings.inj_restarts):
        if restart == 0:
            start = weakest
        else:
            start = crandn((dom.dim, n), restart_rng(settings, salt, restart))
        theta = np.concatenate([start.real.reshape(-1), start.imag.reshape(-1)])
        result = minimize(
            ratio,
            theta,
            method="Nelder-Mead",
            options={"maxiter": settings.quotient_iterations, "xatol": 1e-10, "fatol": 1e-12},
        )
        best = min(best, float(result.fun), ratio(theta))
    if not np.isfinite(best) or best <= 0:
        return np.inf, False
    return 1.0 / best, False


def surjectivity_constant(
    phi: SeqOperator, n: int, settings: Optional[SearchSettings] = None
) -> Tuple[float, bool]:
    """c_surj(φ, n) = c_inj(φ^△, n)"""
    if numerical_rank(phi.matrix) < phi.codomain.dim:
        return np.inf, True
    return injectivity_constant(dual_operator(phi), n, settings)


@performance_monitor.track("classify")
def classify(
    phi: SeqOperator, n_max: int, settings: Optional[SearchSettings] = None
) -> Classification:
    """逐层报告 c_inj、c_surj 与 contractive / isometric / coisometric 标志"""
    settings = _resolve(settings)
    if n_max < 1:
        raise DimensionError(f"n_max 必须 ≥ 1，实际 {n_max}")
    levels = []
    for n in range(1, n_max + 1):
        norm = amp_op_norm(phi, n, settings)
        c_inj, inj_cert = injectivity_constant(phi, n, settings)
        c_surj, surj_cert = surjectivity_constant(phi, n, settings)
        contractive = norm.upper <= 1 + FLAG_TOL
        levels.append(
            LevelClassification(
                level=n,
                norm=norm,
                c_inj=c_inj,
                c_inj_certified=inj_cert,
                c_surj=c_surj,
                c_surj_certified=surj_cert,
                contractive=contractive,
                isometric=contractive and c_inj <= 1 + FLAG_TOL,
                coisometric=contractive and c_surj <= 1 + FLAG_TOL,
            )
        )
    logger.debug(f"分类完成: {phi.describe()}，共 {n_max} 层")
    return Classification(operator=phi.describe(), levels=tuple(levels))

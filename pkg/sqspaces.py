"""
算子序列空间 - 描述符与各结构的放大范数求值器

每个求值器返回有证书的区间 [lower, upper]:
  lower 由存储的见证复现（配对见证 W 满足 ‖W‖_{(X^△)^(m)} ≤ 1，值为 ‖XᵀW‖_F），
  upper 由解析不等式或显式分解给出。
求值前统一把坐标除以 Frobenius 范数，结果再乘回，保证严格齐次。
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, Iterator, Optional, Tuple

import numpy as np
import scipy.linalg

from ascent import (
    ball_ascent,
    coset_descent,
    factorization_upper,
    pairing_ascent,
    pairing_value,
    restart_rng,
    retract_by,
    salt_of,
    spectral_seeds,
)
from config import SearchSettings
from fault_tolerance import (
    DescriptorError,
    DimensionError,
    StructureError,
    handle_evaluation_errors,
)
from ground import (
    INF,
    GroundSpace,
    dual_of,
    g_norm,
    ground_op_norm,
    lp,
    norm_kind,
    norming_functional,
    norming_vector,
    opmatrix,
)
from matcore import (
    as_cmatrix,
    crandn,
    hs_norm,
    nuclear_norm,
    numerical_rank,
    op_norm,
    orthonormal_complement,
    pad_columns,
    polar_decompose,
    svd,
    unitary_factor,
)
from performance import performance_monitor

logger = logging.getLogger("OssCalc.SqSpaces")

LEAF_TAGS = ("hilbmax", "min", "max", "cstar_matrix", "cstar_diag", "t2")
SUM_TAGS = ("dsum_inf", "dsum_one")
TAGS = LEAF_TAGS + SUM_TAGS + ("dual", "subspace", "quotient")

EXACT_RTOL = 1e-9


# ========== 1. 描述符 ==========


@dataclass(frozen=True, eq=False)
class SeqSpaceDesc:
    """算子序列空间的递归描述符"""

    tag: str
    ground: Optional[GroundSpace] = None
    children: Tuple["SeqSpaceDesc", ...] = ()
    basis: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.tag not in TAGS:
            raise DescriptorError(f"未知结构标签: {self.tag}")
        object.__setattr__(self, "children", tuple(self.children))

        if self.tag in LEAF_TAGS:
            self._validate_leaf()
        elif self.tag in SUM_TAGS:
            if not self.children:
                raise DescriptorError("直和至少需要一个分量")
        else:
            if len(self.children) != 1:
                raise DescriptorError(f"{self.tag} 需要恰好一个子空间")
            if self.tag in ("subspace", "quotient"):
                self._validate_basis()

    def _validate_leaf(self):
        if self.ground is None or self.children:
            raise DescriptorError(f"{self.tag} 需要底空间且没有子空间")
        family, param = norm_kind(self.ground)
        if self.tag in ("hilbmax", "t2") and (family, param) != ("lp", 2.0):
            raise DescriptorError(f"{self.tag} 的底空间必须是 ℓ₂")
        if self.tag == "cstar_diag" and (family, param) != ("lp", INF):
            raise DescriptorError("CstarDiag 的底空间必须是 ℓ∞")
        if self.tag == "cstar_matrix" and self.ground.kind != "opmatrix":
            raise DescriptorError("CstarMatrix 的底空间必须是 OpMatrix")

    def _validate_basis(self):
        child_dim = self.children[0].dim
        if self.basis is None:
            raise DescriptorError(f"{self.tag} 需要基矩阵")
        basis = np.asarray(self.basis, dtype=np.complex128)
        if basis.ndim == 1:
            basis = basis.reshape(-1, 1)
        if basis.ndim != 2 or basis.shape[0] != child_dim:
            raise DescriptorError(
                f"基矩阵形状 {basis.shape} 不在父空间 (维数 {child_dim}) 中"
            )
        if not np.all(np.isfinite(basis)):
            raise DescriptorError("基矩阵包含 NaN 或 Inf")
        r = basis.shape[1]
        if self.tag == "subspace" and r == 0:
            raise DescriptorError("子空间基不能为空")
        if self.tag == "quotient" and r >= child_dim:
            raise DescriptorError("商空间的核不能是整个空间")
        if r and numerical_rank(basis) < r:
            raise DescriptorError(f"{self.tag} 的基矩阵秩亏")
        object.__setattr__(self, "basis", basis)

    # ----- 派生量 -----

    @property
    def child(self) -> "SeqSpaceDesc":
        return self.children[0]

    @cached_property
    def dim(self) -> int:
        if self.tag in LEAF_TAGS:
            return self.ground.dim
        if self.tag in SUM_TAGS:
            return sum(c.dim for c in self.children)
        if self.tag == "dual":
            return self.child.dim
        if self.tag == "subspace":
            return self.basis.shape[1]
        return self.child.dim - self.basis.shape[1]

    @cached_property
    def offsets(self) -> Tuple[int, ...]:
        return tuple(np.cumsum([0] + [c.dim for c in self.children[:-1]]).tolist())

    @cached_property
    def complement(self) -> np.ndarray:
        """商空间坐标所用的正交补基 C：陪集 v + K 的坐标为 Cᴴv"""
        return orthonormal_complement(self.basis, self.child.dim)

    def blocks(self) -> Iterator[Tuple["SeqSpaceDesc", slice]]:
        for child, offset in zip(self.children, self.offsets):
            yield child, slice(offset, offset + child.dim)

    def describe(self) -> str:
        if self.tag == "t2":
            return f"T2({self.dim})"
        if self.tag == "cstar_diag":
            return f"CstarDiag({self.dim})"
        if self.tag in LEAF_TAGS:
            name = {"hilbmax": "HilbMax", "min": "Min", "max": "Max"}.get(
                self.tag, "CstarMatrix"
            )
            return f"{name}({self.ground.describe()})"
        if self.tag in SUM_TAGS:
            sign = "⊕∞" if self.tag == "dsum_inf" else "⊕₁"
            return f"{sign}{{{', '.join(c.describe() for c in self.children)}}}"
        if self.tag == "dual":
            return f"Dual({self.child.describe()})"
        return f"{self.tag.capitalize()}({self.child.describe()}, r={self.basis.shape[1]})"


def hilb_max(dim: int) -> SeqSpaceDesc:
    return SeqSpaceDesc("hilbmax", ground=lp(2, dim))


def min_space(ground: GroundSpace) -> SeqSpaceDesc:
    return SeqSpaceDesc("min", ground=ground)


def max_space(ground: GroundSpace) -> SeqSpaceDesc:
    return SeqSpaceDesc("max", ground=ground)


def t2(n: int) -> SeqSpaceDesc:
    """t₂ⁿ = min(ℓ₂ⁿ)"""
    return SeqSpaceDesc("t2", ground=lp(2, n))


def cstar_matrix(a: int, b: Optional[int] = None) -> SeqSpaceDesc:
    return SeqSpaceDesc("cstar_matrix", ground=opmatrix(a, b or a))


def cstar_diag(k: int) -> SeqSpaceDesc:
    return SeqSpaceDesc("cstar_diag", ground=lp(INF, k))


def complex_line() -> SeqSpaceDesc:
    """ℂ 的唯一结构，以 t₂¹ 表示"""
    return t2(1)


def dual_desc(space: SeqSpaceDesc) -> SeqSpaceDesc:
    return SeqSpaceDesc("dual", children=(space,))


def same_space(a: SeqSpaceDesc, b: SeqSpaceDesc) -> bool:
    """结构相等（描述符按身份比较，这里逐层比较内容）"""
    if a is b:
        return True
    if a.tag != b.tag or a.ground != b.ground or len(a.children) != len(b.children):
        return False
    if (a.basis is None) != (b.basis is None):
        return False
    if a.basis is not None and (
        a.basis.shape != b.basis.shape or not np.allclose(a.basis, b.basis, atol=1e-12)
    ):
        return False
    return all(same_space(x, y) for x, y in zip(a.children, b.children))


@dataclass(frozen=True, eq=False)
class ElementColumn:
    """x ∈ X⁽ⁿ⁾：k×n 坐标，第 i 列是 x_i"""

    space: SeqSpaceDesc
    coords: np.ndarray

    def __post_init__(self):
        coords = as_cmatrix(self.coords)
        if coords.shape[0] != self.space.dim:
            raise DimensionError(
                f"坐标高度 {coords.shape[0]} 与 {self.space.describe()} 的维数 "
                f"{self.space.dim} 不符"
            )
        if coords.shape[1] < 1:
            raise DimensionError("层数必须 ≥ 1")
        object.__setattr__(self, "coords", coords)

    @property
    def level(self) -> int:
        return self.coords.shape[1]


# ========== 2. 见证与区间 ==========


@dataclass(frozen=True, eq=False)
class Witness:
    """
    下界见证

    zero: 下界 0；pairing: W，值 ‖XᵀW‖_F；trace: F，值 |Σ X∘F|；
    operator: 定义域元素 X 与到达域对偶元素 G，值 ‖(ΦX)ᵀG‖_F。
    """

    kind: str
    data: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def zero(cls) -> "Witness":
        return cls("zero")

    @classmethod
    def pairing(cls, w: np.ndarray) -> "Witness":
        return cls("pairing", {"W": w})

    @property
    def width(self) -> int:
        return self.data["W"].shape[1] if self.kind == "pairing" else 0

    def mapped(self, matrix: np.ndarray) -> "Witness":
        """W ↦ M·W（子空间、商空间坐标变换）"""
        if self.kind != "pairing":
            return self
        return Witness.pairing(matrix @ self.data["W"])

    def embedded(self, dim: int, rows: slice) -> "Witness":
        """把分量见证补零嵌入直和坐标"""
        if self.kind != "pairing":
            return self
        w = self.data["W"]
        full = np.zeros((dim, w.shape[1]), dtype=np.complex128)
        full[rows] = w
        return Witness.pairing(full)


@dataclass(frozen=True, eq=False)
class NormEstimate:
    """有证书的范数区间"""

    lower: float
    upper: float
    witness: Witness
    certificate: str
    exact: bool = False
    level: Optional[int] = None

    @classmethod
    def build(
        cls, lower: float, upper: float, witness: Witness, certificate: str
    ) -> "NormEstimate":
        lower, upper = max(0.0, float(lower)), float(upper)
        if lower > upper * (1.0 + EXACT_RTOL) + 1e-12:
            logger.warning(f"⚠️ 区间倒置 ({certificate}): 下界 {lower:.12g} > 上界 {upper:.12g}")
        upper = max(upper, lower)
        exact = upper - lower <= EXACT_RTOL * (1.0 + upper)
        return cls(lower, upper, witness, certificate, exact)

    @classmethod
    def zero(cls, certificate: str = "zero_element") -> "NormEstimate":
        return cls(0.0, 0.0, Witness.zero(), certificate, True)

    def scaled(self, factor: float) -> "NormEstimate":
        return NormEstimate.build(
            self.lower * factor, self.upper * factor, self.witness, self.certificate
        )

    def at_level(self, level: int) -> "NormEstimate":
        """记录 Smith 引理给出的达到层数"""
        return NormEstimate(self.lower, self.upper, self.witness, self.certificate, self.exact, level)

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)

    @property
    def gap(self) -> float:
        return self.upper - self.lower

    def overlaps(self, other: "NormEstimate", tol: float = 1e-9) -> bool:
        slack = tol * (1.0 + max(self.upper, other.upper))
        return self.lower <= other.upper + slack and other.lower <= self.upper + slack


def _require_pairing(w: Optional[np.ndarray]) -> Witness:
    return Witness.zero() if w is None else Witness.pairing(w)


def _salt(name: str) -> int:
    return salt_of(f"sqspaces.{name}")


# ========== 3. 分派 ==========


def _check_coords(space: SeqSpaceDesc, coords) -> np.ndarray:
    coords = np.asarray(coords, dtype=np.complex128)
    if coords.ndim == 1:
        coords = coords.reshape(-1, 1)
    if coords.ndim != 2 or coords.shape[0] != space.dim or coords.shape[1] < 1:
        raise DimensionError(
            f"坐标形状 {coords.shape} 与 {space.describe()} (维数 {space.dim}) 不符"
        )
    return coords


def evaluate(space: SeqSpaceDesc, coords, settings: SearchSettings) -> NormEstimate:
    """x 在 X⁽ⁿ⁾ 中的范数区间"""
    coords = _check_coords(space, coords)
    scale = float(np.linalg.norm(coords))
    if scale == 0.0:
        return NormEstimate.zero()
    return _EVALUATORS[space.tag](space, coords / scale, settings).scaled(scale)


def evaluate_dual(
    space: SeqSpaceDesc, coords, settings: SearchSettings, route: str = "structural"
) -> NormEstimate:
    """F 在 (X^△)⁽ⁿ⁾ 中的范数区间"""
    coords = _check_coords(space, coords)
    scale = float(np.linalg.norm(coords))
    if scale == 0.0:
        return NormEstimate.zero()
    f = coords / scale
    if route == "pairing":
        estimate = _dual_by_pairing(space, f, settings)
    elif route == "structural":
        estimate = _DUAL_EVALUATORS[space.tag](space, f, settings)
    else:
        raise StructureError(f"未知对偶路线: {route}")
    return estimate.scaled(scale)


def amp_upper(space: SeqSpaceDesc, coords, settings: SearchSettings) -> float:
    return evaluate(space, coords, settings.upper_only()).upper


def dual_upper(space: SeqSpaceDesc, coords, settings: SearchSettings) -> float:
    return evaluate_dual(space, coords, settings.upper_only()).upper


# ========== 4. 各结构求值器（输入已归一化） ==========


def _frobenius(x: np.ndarray, certificate: str) -> NormEstimate:
    u, _, _ = svd(x)
    value = float(np.linalg.norm(x))
    return NormEstimate.build(value, value, Witness.pairing(np.conj(u)), certificate)


def _spectral(x: np.ndarray, certificate: str) -> NormEstimate:
    u, s, _ = svd(x)
    value = float(s[0])
    return NormEstimate.build(value, value, Witness.pairing(np.conj(u[:, :1])), certificate)


def _row_norm(x: np.ndarray, certificate: str) -> NormEstimate:
    rows = np.linalg.norm(x, axis=1)
    j = int(np.argmax(rows))
    w = np.zeros((x.shape[0], 1), dtype=np.complex128)
    w[j, 0] = 1.0
    value = float(rows[j])
    return NormEstimate.build(value, value, Witness.pairing(w), certificate)


def _eval_hilbmax(space, x, settings):
    return _frobenius(x, "frobenius")


def _eval_t2(space, x, settings):
    return _spectral(x, "sigma_max")


def _eval_min(space, x, settings):
    family, param = norm_kind(space.ground)
    if family == "lp" and param == 2.0:
        return _spectral(x, "sigma_max")
    if family == "lp" and param == INF:
        return _row_norm(x, "max_row_l2")

    ground = space.ground
    n = x.shape[1]
    col_norms = np.array([g_norm(ground, x[:, i]) for i in range(n)])
    bounds = {
        "column_sum": float(np.sum(col_norms)),
        "column_l2": float(np.linalg.norm(col_norms)),
    }
    if family == "lp" and param == 1.0:
        bounds["row_l2_sum"] = float(np.sum(np.linalg.norm(x, axis=1)))
    if family == "op":
        blocks = x.T.reshape(n, *param)
        bounds["row_column"] = min(op_norm(np.hstack(blocks)), op_norm(np.vstack(blocks)))

    restarts = settings.ascent_restarts if settings.lower_search else 0
    op = ground_op_norm(
        x,
        lp(2, n),
        ground,
        restarts=restarts,
        steps=settings.ascent_steps,
        rng=restart_rng(settings, _salt("min"), 0),
    )
    bounds["rank_one"] = op.upper
    certificate = min(bounds, key=bounds.get)

    if op.lower > 0:
        f = norming_functional(ground, x @ op.vector).reshape(-1, 1)
        lower, witness = pairing_value(x, f), Witness.pairing(f)
    else:
        lower, witness = 0.0, Witness.zero()
    return NormEstimate.build(lower, bounds[certificate], witness, certificate)


def _eval_max(space, x, settings):
    ground = space.ground
    upper, certificate = factorization_upper(
        x, lambda v: g_norm(ground, v), settings, _salt("max")
    )
    if not settings.lower_search:
        return NormEstimate.build(0.0, upper, Witness.zero(), certificate)

    floor = _eval_min(min_space(ground), x, settings)
    dual_ball = min_space(dual_of(ground))
    n = x.shape[1]
    seeds = spectral_seeds(x, n)
    if floor.witness.kind == "pairing":
        seeds.append(pad_columns(floor.witness.data["W"], n))
    value, w = pairing_ascent(
        x,
        retract_by(lambda w: amp_upper(dual_ball, w, settings)),
        seeds,
        n,
        settings,
        _salt("max.lower"),
    )
    if w is None or floor.lower >= value:
        return NormEstimate.build(floor.lower, upper, floor.witness, certificate)
    return NormEstimate.build(value, upper, Witness.pairing(w), certificate)


def _eval_cstar_matrix(space, x, settings):
    a, b = space.ground.a, space.ground.b
    n = x.shape[1]
    stacked = x.T.reshape(n, a, b).reshape(n * a, b)
    _, s, vh = svd(stacked)
    h = np.conj(vh[0, :]).reshape(b, 1)
    # 向量态 a ↦ a·h 对应的泛函列: W[(j, c), j] = h_c
    w = np.kron(np.eye(a), h)
    value = float(s[0])
    return NormEstimate.build(value, value, Witness.pairing(w), "stacked_sigma_max")


def _eval_cstar_diag(space, x, settings):
    return _row_norm(x, "max_row_l2")


def _eval_dsum_inf(space, x, settings):
    parts = list(space.blocks())
    estimates = [evaluate(child, x[rows], settings) for child, rows in parts]
    i = int(np.argmax([e.lower for e in estimates]))
    witness = estimates[i].witness.embedded(space.dim, parts[i][1])
    lower = max(e.lower for e in estimates)
    upper = max(e.upper for e in estimates)
    return NormEstimate.build(lower, upper, witness, "max_of_components")


def _eval_dsum_one(space, x, settings):
    parts = list(space.blocks())
    estimates = [evaluate(child, x[rows], settings) for child, rows in parts]
    sum_upper = sum(e.upper for e in estimates)

    def column_upper(v: np.ndarray) -> float:
        return sum(amp_upper(child, v[rows, None], settings) for child, rows in parts)

    fact_upper, fact_cert = factorization_upper(x, column_upper, settings, _salt("dsum_one"))
    if sum_upper <= fact_upper:
        upper, certificate = sum_upper, "sum_of_components"
    else:
        upper, certificate = fact_upper, fact_cert

    # 投影 p_λ 是收缩，max_λ ‖x_λ‖ 是下界
    i = int(np.argmax([e.lower for e in estimates]))
    lower = estimates[i].lower
    witness = estimates[i].witness.embedded(space.dim, parts[i][1])
    if not settings.lower_search:
        return NormEstimate.build(lower, upper, witness, certificate)

    n = x.shape[1]
    m = max([n] + [e.witness.width for e in estimates])
    blocks = [
        pad_columns(e.witness.data["W"], m)
        if e.witness.kind == "pairing"
        else np.zeros((child.dim, m), dtype=np.complex128)
        for e, (child, _) in zip(estimates, parts)
    ]
    pairings = [x[rows].T @ w for w, (_, rows) in zip(blocks, parts)]
    target = pairings[i]
    # 各分量见证右乘酉矩阵，使配对矩阵与最强分量同向
    aligned = [w @ unitary_factor(p.conj().T @ target) for w, p in zip(blocks, pairings)]
    seeds = [np.vstack(aligned)] + spectral_seeds(x, m)

    def retract(w: np.ndarray) -> Optional[np.ndarray]:
        out = np.zeros_like(w)
        for child, rows in parts:
            block = w[rows]
            if np.any(block):
                u = dual_upper(child, block, settings)
                if u > 0:
                    out[rows] = block / u
        return out if np.any(out) else None

    value, w = pairing_ascent(x, retract, seeds, m, settings, _salt("dsum_one.lower"))
    if w is not None and value > lower:
        lower, witness = value, Witness.pairing(w)
    return NormEstimate.build(lower, upper, witness, certificate)


def _eval_dual(space, x, settings):
    return evaluate_dual(space.child, x, settings, settings.dual_route)


def _eval_subspace(space, x, settings):
    estimate = evaluate(space.child, space.basis @ x, settings)
    return NormEstimate.build(
        estimate.lower,
        estimate.upper,
        estimate.witness.mapped(space.basis.T),
        f"subspace:{estimate.certificate}",
    )


def _eval_quotient(space, x, settings):
    child, kernel, comp = space.child, space.basis, space.complement
    v0 = comp @ x
    if not settings.quick:
        value, v_best = coset_descent(
            lambda v: amp_upper(child, v, settings), v0, kernel, settings, _salt("quotient")
        )
    else:
        value, v_best = amp_upper(child, v0, settings), v0
    representative = evaluate(child, v_best, settings)
    upper = min(value, representative.upper)
    if not settings.lower_search:
        return NormEstimate.build(0.0, upper, Witness.zero(), "coset_representative")

    # 零化子 K^⊥ = range(conj C)，商坐标中的泛函 G 对应 conj(C)·G
    n = x.shape[1]
    extra = []
    if representative.witness.kind == "pairing":
        extra.append(comp.T @ representative.witness.data["W"])
    m = max([n] + [e.shape[1] for e in extra])
    seeds = spectral_seeds(x, m) + [pad_columns(e, m) for e in extra]
    value, g = pairing_ascent(
        x,
        retract_by(lambda g: dual_upper(child, np.conj(comp) @ g, settings)),
        seeds,
        m,
        settings,
        _salt("quotient.lower"),
    )
    return NormEstimate.build(value, upper, _require_pairing(g), "coset_descent")


_EVALUATORS: Dict[str, Callable[..., NormEstimate]] = {
    "hilbmax": _eval_hilbmax,
    "min": _eval_min,
    "max": _eval_max,
    "cstar_matrix": _eval_cstar_matrix,
    "cstar_diag": _eval_cstar_diag,
    "t2": _eval_t2,
    "dsum_inf": _eval_dsum_inf,
    "dsum_one": _eval_dsum_one,
    "dual": _eval_dual,
    "subspace": _eval_subspace,
    "quotient": _eval_quotient,
}


# ========== 5. 对偶范数 ==========
# (min E)^△ = max E*，(max E)^△ = min E*，(⊕∞)^△ = ⊕₁ 对偶，(⊕₁)^△ = ⊕∞ 对偶，
# (X/X₀)^△ = X₀^⊥，X₀^△ = X^△/X₀^⊥，X^△△ = X


def _dual_by_pairing(space, f, settings):
    """配对路线: 下界在原空间单位球上上升，上界沿用结构路线"""
    structural = _DUAL_EVALUATORS[space.tag](space, f, settings.upper_only())
    if not settings.lower_search:
        return NormEstimate.build(0.0, structural.upper, Witness.zero(), structural.certificate)
    n = f.shape[1]
    value, y = pairing_ascent(
        f,
        retract_by(lambda y: amp_upper(space, y, settings)),
        spectral_seeds(f, n),
        n,
        settings,
        _salt("dual.pairing"),
    )
    return NormEstimate.build(
        value, structural.upper, _require_pairing(y), f"pairing_route:{structural.certificate}"
    )


def _dual_cstar_matrix(space, f, settings):
    ground = space.ground
    a, b = ground.a, ground.b
    n = f.shape[1]
    columns = [nuclear_norm(f[:, j].reshape(a, b)) for j in range(n)]
    upper = float(np.linalg.norm(columns))
    if not settings.lower_search:
        return NormEstimate.build(0.0, upper, Witness.zero(), "column_nuclear")
    norming = np.column_stack([norming_vector(ground, f[:, j]) for j in range(n)])
    value, y = pairing_ascent(
        f,
        retract_by(lambda y: evaluate(space, y, settings).upper),
        spectral_seeds(f, n) + [norming],
        n,
        settings,
        _salt("dual.cstar_matrix"),
    )
    return NormEstimate.build(value, upper, _require_pairing(y), "column_nuclear")


def _dual_subspace(space, f, settings):
    child, basis = space.child, space.basis
    # Bᵀg = f 的通解 g0 + N·Z
    g0 = scipy.linalg.pinv(basis.T) @ f
    null = scipy.linalg.null_space(basis.T).astype(np.complex128)
    if not settings.quick:
        upper, _ = coset_descent(
            lambda g: dual_upper(child, g, settings), g0, null, settings, _salt("dual.subspace")
        )
    else:
        upper = dual_upper(child, g0, settings)
    if not settings.lower_search:
        return NormEstimate.build(0.0, upper, Witness.zero(), "extension_descent")
    n = f.shape[1]
    value, y = pairing_ascent(
        f,
        retract_by(lambda y: amp_upper(space, y, settings)),
        spectral_seeds(f, n),
        n,
        settings,
        _salt("dual.subspace.lower"),
    )
    return NormEstimate.build(value, upper, _require_pairing(y), "extension_descent")


def _dual_quotient(space, f, settings):
    comp = space.complement
    estimate = evaluate_dual(space.child, np.conj(comp) @ f, settings)
    return NormEstimate.build(
        estimate.lower,
        estimate.upper,
        estimate.witness.mapped(comp.conj().T),
        f"annihilator:{estimate.certificate}",
    )


_DUAL_EVALUATORS: Dict[str, Callable[..., NormEstimate]] = {
    "hilbmax": lambda space, f, st: _spectral(f, "dual_hilbmax_sigma_max"),
    "t2": lambda space, f, st: _frobenius(f, "dual_t2_frobenius"),
    "min": lambda space, f, st: evaluate(max_space(dual_of(space.ground)), f, st),
    "max": lambda space, f, st: evaluate(min_space(dual_of(space.ground)), f, st),
    "cstar_diag": lambda space, f, st: evaluate(max_space(lp(1, space.dim)), f, st),
    "cstar_matrix": _dual_cstar_matrix,
    "dsum_inf": lambda space, f, st: evaluate(
        SeqSpaceDesc("dsum_one", children=tuple(dual_desc(c) for c in space.children)), f, st
    ),
    "dsum_one": lambda space, f, st: evaluate(
        SeqSpaceDesc("dsum_inf", children=tuple(dual_desc(c) for c in space.children)), f, st
    ),
    "dual": lambda space, f, st: evaluate(space.child, f, st),
    "subspace": _dual_subspace,
    "quotient": _dual_quotient,
}


# ========== 6. 公开运算 ==========


def _resolve(settings: Optional[SearchSettings]) -> SearchSettings:
    return settings if settings is not None else SearchSettings.from_config()


def _require(x: ElementColumn, tags: Tuple[str, ...], operation: str):
    if x.space.tag not in tags:
        raise StructureError(f"{operation} 需要结构 {tags}，实际 {x.space.tag}")


@performance_monitor.track("amp_norm")
@handle_evaluation_errors("amp_norm")
def amp_norm(x: ElementColumn, settings: Optional[SearchSettings] = None) -> NormEstimate:
    """任意结构上的放大范数"""
    return evaluate(x.space, x.coords, _resolve(settings))


def hilb_norm(x: ElementColumn, settings: Optional[SearchSettings] = None) -> NormEstimate:
    _require(x, ("hilbmax",), "hilb_norm")
    return amp_norm(x, settings)


def min_norm(x: ElementColumn, settings: Optional[SearchSettings] = None) -> NormEstimate:
    _require(x, ("min", "t2"), "min_norm")
    return amp_norm(x, settings)


def cstar_norm(x: ElementColumn, settings: Optional[SearchSettings] = None) -> NormEstimate:
    _require(x, ("cstar_matrix", "cstar_diag"), "cstar_norm")
    return amp_norm(x, settings)


def max_norm(x: ElementColumn, settings: Optional[SearchSettings] = None) -> NormEstimate:
    _require(x, ("max",), "max_norm")
    return amp_norm(x, settings)


def dsum_inf_norm(x: ElementColumn, settings: Optional[SearchSettings] = None) -> NormEstimate:
    _require(x, ("dsum_inf",), "dsum_inf_norm")
    return amp_norm(x, settings)


def dsum_one_norm(x: ElementColumn, settings: Optional[SearchSettings] = None) -> NormEstimate:
    _require(x, ("dsum_one",), "dsum_one_norm")
    return amp_norm(x, settings)


def subspace_norm(x: ElementColumn, settings: Optional[SearchSettings] = None) -> NormEstimate:
    _require(x, ("subspace",), "subspace_norm")
    return amp_norm(x, settings)


def quotient_norm(x: ElementColumn, settings: Optional[SearchSettings] = None) -> NormEstimate:
    _require(x, ("quotient",), "quotient_norm")
    return amp_norm(x, settings)


@performance_monitor.track("dual_amp_norm")
@handle_evaluation_errors("dual_amp_norm")
def dual_amp_norm(
    f: ElementColumn,
    settings: Optional[SearchSettings] = None,
    route: Optional[str] = None,
) -> NormEstimate:
    """
    f ∈ (X^△)⁽ⁿ⁾ 的范数

    route="structural" 走对偶恒等式；route="pairing" 的下界在 X 的单位球
    上做配对上升（层数取 n），上界仍来自结构路线。
    """
    _require(f, ("dual",), "dual_amp_norm")
    settings = _resolve(settings)
    return evaluate_dual(f.space.child, f.coords, settings, route or settings.dual_route)


def dual_norm(
    space: SeqSpaceDesc,
    coords,
    settings: Optional[SearchSettings] = None,
    route: Optional[str] = None,
) -> NormEstimate:
    """坐标 F 在 (X^△)⁽ⁿ⁾ 中的范数，不必先构造 Dual 描述符"""
    settings = _resolve(settings)
    return evaluate_dual(space, coords, settings, route or settings.dual_route)


def pairing_amplify(x: ElementColumn, f: ElementColumn) -> np.ndarray:
    """第 (i, j) 项为 f_j(x_i) = Σ_c f_j[c]·x_i[c]，按行优先展开"""
    if x.coords.shape[0] != f.coords.shape[0]:
        raise DimensionError(
            f"配对双方底空间维数不同: {x.coords.shape[0]} ≠ {f.coords.shape[0]}"
        )
    return (x.coords.T @ f.coords).reshape(-1)


def level_norm(
    space: SeqSpaceDesc, v: np.ndarray, settings: Optional[SearchSettings] = None
) -> NormEstimate:
    """一层范数 ‖v‖₍₁₎"""
    return evaluate(space, np.asarray(v).reshape(-1, 1), _resolve(settings))


def replay_witness(coords: np.ndarray, estimate: NormEstimate) -> float:
    """用存储的见证重新计算下界"""
    witness = estimate.witness
    coords = np.asarray(coords, dtype=np.complex128)
    if witness.kind == "zero":
        return 0.0
    if witness.kind == "pairing":
        return pairing_value(coords, witness.data["W"])
    if witness.kind == "trace":
        return float(abs(np.sum(coords * witness.data["F"])))
    raise StructureError(f"见证类型 {witness.kind} 需要算子才能复现")


# ========== 7. t₂ⁿ(X) 范数 ==========


def _invertible_variant(space, xt, at, target, settings):
    """
    把分解 x = αx̃ 换成可逆 α′

    α = |α*|·ρ，x′ = ρx̃；在 |α*| 的核上加 δ·P 得到可逆 α′，
    x″ = P_range x′，于是 x = α′x″ 且 ‖x″‖ ≤ ‖ρ‖‖x̃‖。
    """
    n = at.shape[1]
    pos, rho = polar_decompose(at.T)
    x1 = xt @ rho.T
    evals, evecs = np.linalg.eigh(pos)
    tol = max(float(np.max(np.abs(evals))), 1.0) * 1e-12
    range_vecs = evecs[:, evals > tol]
    p_range = range_vecs @ range_vecs.conj().T
    delta = 1e-9 * max(1.0, float(np.max(np.abs(evals))))
    pos_delta = pos + delta * (np.eye(n) - p_range)
    x2 = x1 @ p_range.T
    if np.linalg.norm(x2 @ pos_delta.T - target) > 1e-9 * (1.0 + np.linalg.norm(target)):
        return np.inf
    bound = min(
        amp_upper(space, x2, settings),
        op_norm(rho) * amp_upper(space, xt, settings) if rho.size else np.inf,
    )
    return hs_norm(pos_delta) * bound


def _t2n_candidates(x: np.ndarray, settings: SearchSettings):
    n = x.shape[1]
    candidates = [(x, np.eye(n, dtype=np.complex128))]
    u, s, vh = svd(x)
    r = numerical_rank(x)
    if r:
        u, s, vh = u[:, :r], s[:r], vh[:r, :]
        root = np.sqrt(s)
        candidates += [
            (u, s[:, None] * vh),
            (u * root, root[:, None] * vh),
            (u * s, vh),
        ]
    for restart in range(settings.factor_restarts):
        rng = restart_rng(settings, _salt("t2n"), restart)
        blocks = 1 + restart % settings.factor_max_blocks
        at = crandn((n * blocks, n), rng)
        candidates.append((x @ scipy.linalg.pinv(at), at))
    return candidates


def _t2n_balanced(space, xt, at, settings):
    """对角重标 d_j = (‖at_j‖/c_j)^{1/2} 后的 ‖α‖_hs·‖x̃‖ 上界"""
    c = np.array([amp_upper(space, xt[:, j], settings) for j in range(xt.shape[1])])
    row = np.linalg.norm(at, axis=1)
    keep = (c > 0) & (row > 0)
    if not np.any(keep):
        return np.inf, xt, at
    xt, at = xt[:, keep], at[keep, :]
    d = np.sqrt(row[keep] / c[keep])
    xt, at = xt * d, at / d[:, None]
    return hs_norm(at) * amp_upper(space, xt, settings), xt, at


@performance_monitor.track("t2n_norm")
@handle_evaluation_errors("t2n_norm")
def t2n_norm(
    x: ElementColumn,
    space: Optional[SeqSpaceDesc] = None,
    n: Optional[int] = None,
    settings: Optional[SearchSettings] = None,
    invertible: bool = False,
) -> NormEstimate:
    """
    t₂ⁿ(X) 范数: inf{‖α‖_hs·‖x̃‖ : x = αx̃}

    invertible=True 时只使用可逆 n×n 的 α′（极分解 + δ 扰动）；
    下界为 sup |Σ f_i(x_i)|，f 取遍 (X^△)⁽ⁿ⁾ 单位球。
    """
    settings = _resolve(settings)
    space = space or x.space
    if n is not None and n != x.level:
        raise DimensionError(f"层数 {n} 与元素列高度 {x.level} 不符")
    coords = _check_coords(space, x.coords)
    scale = float(np.linalg.norm(coords))
    if scale == 0.0:
        return NormEstimate.zero()
    target = coords / scale

    upper_settings = settings.upper_only()
    unrestricted, restricted = np.inf, np.inf
    for xt, at in _t2n_candidates(target, settings):
        value, xt_b, at_b = _t2n_balanced(space, xt, at, upper_settings)
        direct = hs_norm(at) * amp_upper(space, xt, upper_settings)
        unrestricted = min(unrestricted, value, direct)
        for cand_xt, cand_at in ((xt, at), (xt_b, at_b)):
            if cand_at.shape[0]:
                restricted = min(
                    restricted,
                    _invertible_variant(space, cand_xt, cand_at, target, upper_settings),
                )
    # 可逆分解也是普通分解
    unrestricted = min(unrestricted, restricted)
    upper = restricted if invertible else unrestricted
    certificate = "t2n_invertible" if invertible else "t2n_factorization"

    lower, witness = 0.0, Witness.zero()
    if settings.lower_search:
        u, _, vh = svd(target)
        seeds = [np.conj(target), np.conj(u @ vh)]
        value, f = ball_ascent(
            objective=lambda f: float(abs(np.sum(target * f))),
            gradient=lambda f: np.conj(target) * np.sum(target * f),
            retract=retract_by(lambda f: dual_upper(space, f, settings)),
            seeds=seeds,
            shape=target.shape,
            settings=settings,
            salt=_salt("t2n.lower"),
        )
        if f is not None:
            lower, witness = value, Witness("trace", {"F": f})

    return NormEstimate.build(lower, upper, witness, certificate).scaled(scale)


# ========== 8. 结构分类（供算子模块使用） ==========


def structure_kind(space: SeqSpaceDesc) -> Optional[str]:
    """
    "frob": 放大范数是 Frobenius 范数；"spec": 是最大奇异值；否则 None
    """
    if space.tag == "hilbmax":
        return "frob"
    if space.tag == "t2":
        return "spec"
    if space.tag in ("min", "max") and norm_kind(space.ground) == ("lp", 2.0):
        return "spec" if space.tag == "min" else "frob"
    if space.tag == "dual":
        inner = structure_kind(space.child)
        return {"frob": "spec", "spec": "frob"}.get(inner)
    if space.tag == "quotient":
        return structure_kind(space.child)
    if space.tag == "subspace":
        b = space.basis
        if np.allclose(b.conj().T @ b, np.eye(b.shape[1]), atol=1e-12):
            return structure_kind(space.child)
    return None


def is_minimal(space: SeqSpaceDesc) -> bool:
    if space.tag in ("min", "t2", "cstar_diag"):
        return True
    return space.tag == "dual" and is_maximal(space.child)


def is_maximal(space: SeqSpaceDesc) -> bool:
    if space.tag in ("max", "hilbmax"):
        return True
    return space.tag == "dual" and is_minimal(space.child)


def level1_ground(space: SeqSpaceDesc) -> Optional[GroundSpace]:
    """一层范数对应的底空间（直和、子空间、商空间没有）"""
    if space.tag in LEAF_TAGS:
        return space.ground
    if space.tag == "dual":
        inner = level1_ground(space.child)
        return dual_of(inner) if inner is not None else None
    return None

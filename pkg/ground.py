"""
底空间 - 有限维赋范空间 E = ℂ^k（ℓ_p、矩阵算子范数、对偶）

配对是双线性的: f(v) = Σ f_i v_i（不取共轭）。
OpMatrix(a, b) 把 ℂ^k 按行优先读成 a×b 矩阵。
"""

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np

from fault_tolerance import DescriptorError, DimensionError
from matcore import EPS, singular_values, svd

logger = logging.getLogger("OssCalc.Ground")

INF = math.inf
_CONJUGATE_EXPONENT = {1.0: INF, 2.0: 2.0, INF: 1.0}


@dataclass(frozen=True)
class GroundSpace:
    """底空间描述符"""

    kind: str
    dim: int
    p: Optional[float] = None
    a: Optional[int] = None
    b: Optional[int] = None
    base: Optional["GroundSpace"] = None

    def __post_init__(self):
        if self.dim < 1:
            raise DescriptorError(f"底空间维数必须 ≥ 1，实际 {self.dim}")
        if self.kind == "lp":
            if self.p not in _CONJUGATE_EXPONENT:
                raise DescriptorError(f"只支持 p ∈ {{1, 2, ∞}}，实际 p={self.p}")
        elif self.kind == "opmatrix":
            if not self.a or not self.b or self.a * self.b != self.dim:
                raise DescriptorError(
                    f"OpMatrix({self.a}, {self.b}) 与维数 {self.dim} 不符"
                )
        elif self.kind == "dual":
            if self.base is None or self.base.dim != self.dim:
                raise DescriptorError("DualOf 必须给出同维数的基空间")
        else:
            raise DescriptorError(f"未知底空间类型: {self.kind}")

    def describe(self) -> str:
        if self.kind == "lp":
            return f"l{'inf' if self.p == INF else int(self.p)}^{self.dim}"
        if self.kind == "opmatrix":
            return f"M{self.a}x{self.b}"
        return f"({self.base.describe()})*"


def lp(p, dim: int) -> GroundSpace:
    p = INF if p in ("inf", INF) else float(p)
    return GroundSpace("lp", dim, p=p)


def opmatrix(a: int, b: int) -> GroundSpace:
    return GroundSpace("opmatrix", a * b, a=a, b=b)


def dual_of(space: GroundSpace) -> GroundSpace:
    """E*；E** 直接折叠回 E"""
    if space.kind == "dual":
        return space.base
    return GroundSpace("dual", space.dim, base=space)


def norm_kind(space: GroundSpace) -> Tuple[str, object]:
    """
    解析对偶后的实际范数类型

    返回 ("lp", p) / ("op", (a, b)) / ("nuclear", (a, b))
    """
    if space.kind == "lp":
        return "lp", space.p
    if space.kind == "opmatrix":
        return "op", (space.a, space.b)
    return _dual_family(*norm_kind(space.base))


def _dual_family(family: str, param) -> Tuple[str, object]:
    if family == "lp":
        return "lp", _CONJUGATE_EXPONENT[param]
    return ("nuclear" if family == "op" else "op"), param


def _as_vector(space: GroundSpace, v) -> np.ndarray:
    v = np.asarray(v, dtype=np.complex128).reshape(-1)
    if v.shape[0] != space.dim:
        raise DimensionError(f"向量长度 {v.shape[0]} 与底空间维数 {space.dim} 不符")
    return v


def _family_norm(family: str, param, v: np.ndarray) -> float:
    if family == "lp":
        return float(np.linalg.norm(v, ord=param))
    s = singular_values(v.reshape(param))
    if family == "op":
        return float(s[0])
    return float(np.sum(s))


def _family_norming(family: str, param, v: np.ndarray) -> np.ndarray:
    """f 满足对偶范数 ≤ 1 且 Σ f_i v_i = ‖v‖"""
    if not np.any(v):
        return np.zeros_like(v)

    if family == "lp":
        mod = np.abs(v)
        if param == 2.0:
            return np.conj(v) / np.linalg.norm(v)
        if param == 1.0:
            return np.where(mod > 0, np.conj(v) / np.maximum(mod, EPS), 1.0)
        j = int(np.argmax(mod))
        f = np.zeros_like(v)
        f[j] = np.conj(v[j]) / mod[j]
        return f

    u, s, vh = svd(v.reshape(param))
    if family == "op":
        # Σ F_ij V_ij = u₁* V conj(vh₁) = σ₁，秩一的 F 核范数为 1
        return np.outer(np.conj(u[:, 0]), np.conj(vh[0, :])).reshape(-1)
    # 核范数由 conj(U)·conj(Vh) 达到，其算子范数为 1
    return (np.conj(u) @ np.conj(vh)).reshape(-1)


# ========== 公开运算 ==========


def g_norm(space: GroundSpace, v) -> float:
    """底空间范数（对偶类型按对偶范数计算）"""
    family, param = norm_kind(space)
    return _family_norm(family, param, _as_vector(space, v))


def g_dual_norm(space: GroundSpace, f) -> float:
    """泛函 f 在 E* 中的范数"""
    family, param = _dual_family(*norm_kind(space))
    return _family_norm(family, param, _as_vector(space, f))


def norming_functional(space: GroundSpace, v) -> np.ndarray:
    """Hahn–Banach 见证: ‖f‖_* ≤ 1 且 f(v) = ‖v‖"""
    family, param = norm_kind(space)
    return _family_norming(family, param, _as_vector(space, v))


def norming_vector(space: GroundSpace, f) -> np.ndarray:
    """‖v‖ ≤ 1 且 f(v) = ‖f‖_*"""
    family, param = _dual_family(*norm_kind(space))
    return _family_norming(family, param, _as_vector(space, f))


class GroundOpNorm(NamedTuple):
    lower: float
    upper: float
    vector: np.ndarray
    exact: bool


def ground_op_norm(
    phi: np.ndarray,
    domain: GroundSpace,
    codomain: GroundSpace,
    restarts: int = 8,
    steps: int = 50,
    rng: Optional[np.random.Generator] = None,
) -> GroundOpNorm:
    """
    一层算子范数 ‖Φ: E → F‖

    ℓ2→ℓ2、ℓ1→任意、任意→ℓ∞ 精确；其余情形下界用范数化交替迭代，
    上界用秩一分解 Σ σ_r ‖u_r‖_F ‖vh_r‖_{E*}。
    """
    phi = np.asarray(phi, dtype=np.complex128)
    if phi.shape != (codomain.dim, domain.dim):
        raise DimensionError(
            f"算子矩阵形状 {phi.shape} 与 {codomain.dim}×{domain.dim} 不符"
        )
    dom_family, dom_param = norm_kind(domain)
    cod_family, cod_param = norm_kind(codomain)

    if dom_family == "lp" and dom_param == 1.0:
        norms = [g_norm(codomain, phi[:, j]) for j in range(domain.dim)]
        j = int(np.argmax(norms))
        v = np.zeros(domain.dim, dtype=np.complex128)
        v[j] = 1.0
        return GroundOpNorm(norms[j], norms[j], v, True)

    if cod_family == "lp" and cod_param == INF:
        norms = [g_dual_norm(domain, phi[i, :]) for i in range(codomain.dim)]
        i = int(np.argmax(norms))
        v = norming_vector(domain, phi[i, :])
        return GroundOpNorm(norms[i], norms[i], v, True)

    u, s, vh = svd(phi)
    if dom_family == cod_family == "lp" and dom_param == cod_param == 2.0:
        v = np.conj(vh[0, :]) if s.size else np.zeros(domain.dim, np.complex128)
        top = float(s[0]) if s.size else 0.0
        return GroundOpNorm(top, top, v, True)

    upper = float(
        sum(
            s[r] * g_norm(codomain, u[:, r]) * g_dual_norm(domain, vh[r, :])
            for r in range(s.size)
            if s[r] > 0
        )
    )

    rng = rng if rng is not None else np.random.default_rng(0)
    seeds = [np.conj(vh[r, :]) for r in range(min(s.size, 2))]
    best, best_v = 0.0, np.zeros(domain.dim, dtype=np.complex128)
    for restart in range(restarts):
        if restart < len(seeds):
            v = seeds[restart]
        else:
            v = rng.normal(size=domain.dim) + 1j * rng.normal(size=domain.dim)
        v = v / max(g_norm(domain, v), EPS)
        value = g_norm(codomain, phi @ v)
        for _ in range(steps):
            g = norming_functional(codomain, phi @ v)
            candidate = norming_vector(domain, phi.T @ g)
            scale = g_norm(domain, candidate)
            if scale <= 0:
                break
            candidate = candidate / scale
            new_value = g_norm(codomain, phi @ candidate)
            if new_value <= value * (1 + 1e-12):
                break
            v, value = candidate, new_value
        if value > best:
            best, best_v = value, v

    upper = max(upper, best)
    return GroundOpNorm(best, upper, best_v, upper - best <= 1e-9 * (1 + upper))

"""
矩阵基础运算 - 复稠密矩阵的范数、奇异值、极分解、分块拼接与矩阵作用

约定: 元素列 x = (x_1, …, x_n) 以 k×n 坐标数组存放，第 i 列是 x_i 的坐标。
矩阵 α (m×n) 作用在列上 (αx)_i = Σ_j α_ij x_j，对应坐标 X·αᵀ。
"""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from fault_tolerance import DimensionError, InputError, with_linalg_retry

logger = logging.getLogger("OssCalc.MatCore")

EPS = np.finfo(np.float64).eps


def as_cmatrix(a) -> np.ndarray:
    """转为二维 complex128 数组并检查有限性；一维输入视为列向量"""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    elif m.ndim == 1:
        m = m.reshape(-1, 1)
    elif m.ndim != 2:
        raise DimensionError(f"矩阵必须是二维数组，实际 ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise InputError("矩阵包含 NaN 或 Inf")
    return m


def crandn(size, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """标准复高斯随机数"""
    if rng is None:
        rng = np.random.default_rng()
    # 1/sqrt(2) 使实部虚部方差之和为 1
    return (rng.normal(size=size) + 1j * rng.normal(size=size)) / np.sqrt(2)


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar 随机酉矩阵（QR 后修正相位）"""
    q, r = np.linalg.qr(crandn((n, n), rng))
    d = np.diag(r)
    phases = np.where(np.abs(d) > 0, d / np.maximum(np.abs(d), EPS), 1.0)
    return q * phases


# ========== 奇异值 ==========


@with_linalg_retry()
def singular_values(a: np.ndarray, lapack_driver: str = "gesdd") -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    if a.size == 0:
        return np.zeros(0)
    return scipy.linalg.svd(
        a, compute_uv=False, check_finite=False, lapack_driver=lapack_driver
    )


@with_linalg_retry()
def svd(
    a: np.ndarray, full_matrices: bool = False, lapack_driver: str = "gesdd"
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.complex128)
    rows, cols = a.shape
    if a.size == 0:
        r = rows if full_matrices else min(rows, cols)
        c = cols if full_matrices else min(rows, cols)
        return (
            np.eye(rows, r, dtype=np.complex128),
            np.zeros(min(rows, cols)),
            np.eye(c, cols, dtype=np.complex128),
        )
    return scipy.linalg.svd(
        a, full_matrices=full_matrices, check_finite=False, lapack_driver=lapack_driver
    )


def op_norm(a) -> float:
    """最大奇异值（零矩阵返回 0）"""
    s = singular_values(as_cmatrix(a))
    return float(s[0]) if s.size else 0.0


def hs_norm(a) -> float:
    """Hilbert–Schmidt 范数: trace(|a|²)^{1/2}"""
    return float(np.linalg.norm(as_cmatrix(a)))


def nuclear_norm(a) -> float:
    return float(np.sum(singular_values(as_cmatrix(a))))


def numerical_rank(a, rtol: Optional[float] = None) -> int:
    s = singular_values(as_cmatrix(a))
    if not s.size or s[0] == 0:
        return 0
    if rtol is None:
        rtol = max(np.asarray(a).shape) * EPS
    return int(np.sum(s > rtol * s[0]))


def polar_decompose(a) -> Tuple[np.ndarray, np.ndarray]:
    """
    极分解 a = pos · rho

    pos = |a*| = UΣU*（n×n 半正定），rho = U₊V₊* 为部分等距，
    零奇异值方向上 rho 取零块，因此 op_norm(rho) ≤ 1。
    """
    a = as_cmatrix(a)
    u, s, vh = svd(a)
    pos = (u * s) @ u.conj().T
    tol = (s[0] if s.size else 0.0) * max(a.shape) * EPS
    keep = s > tol
    rho = u[:, keep] @ vh[keep, :]
    return pos, rho


# ========== 拼接与作用 ==========


def glue_right(parts: Sequence) -> np.ndarray:
    """[α₁,…,α_k]：行数相同的矩阵从右侧拼接"""
    mats = [as_cmatrix(p) for p in parts]
    if not mats:
        raise DimensionError("至少需要一个矩阵块")
    rows = {m.shape[0] for m in mats}
    if len(rows) != 1:
        raise DimensionError(f"拼接的矩阵行数不一致: {sorted(rows)}")
    return np.hstack(mats)


def stack_columns(*columns: np.ndarray) -> np.ndarray:
    """把若干元素列首尾相接（x 叠在 y 之上）"""
    heights = {c.shape[0] for c in columns}
    if len(heights) != 1:
        raise DimensionError(f"底空间维数不一致: {sorted(heights)}")
    return np.hstack(columns)


def mat_apply(alpha, coords: np.ndarray) -> np.ndarray:
    """(αx)_i = Σ_j α_ij x_j，返回新坐标 X·αᵀ"""
    alpha = as_cmatrix(alpha)
    coords = np.asarray(coords, dtype=np.complex128)
    if coords.ndim != 2 or alpha.shape[1] != coords.shape[1]:
        raise DimensionError(
            f"矩阵列数 {alpha.shape[1]} 与元素列高度 "
            f"{coords.shape[1] if coords.ndim == 2 else '?'} 不一致"
        )
    return coords @ alpha.T


def pad_columns(a: np.ndarray, width: int) -> np.ndarray:
    """右侧补零列到指定宽度（已足够宽则原样返回）"""
    if a.shape[1] >= width:
        return a
    return np.hstack([a, np.zeros((a.shape[0], width - a.shape[1]), dtype=a.dtype)])


def orthonormal_complement(k: np.ndarray, dim: int) -> np.ndarray:
    """span(k) 的正交补的标准正交基（dim × (dim − rank)）"""
    if k.shape[1] == 0:
        return np.eye(dim, dtype=np.complex128)
    return scipy.linalg.null_space(k.conj().T).astype(np.complex128)


def unitary_factor(a: np.ndarray) -> np.ndarray:
    """极分解的酉因子 UVh（用于对齐相位/方向）"""
    u, _, vh = svd(a)
    return u @ vh

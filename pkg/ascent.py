"""
搜索内核 - 球上投影上升（下界）、分解搜索（上界）、陪集下降（商范数）

所有随机性来自 (seed, salt, restart) 派生的独立流，结果与调度顺序无关。
"""

import logging
import zlib
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.optimize import minimize

from config import SearchSettings
from fault_tolerance import check_cancelled
from matcore import crandn, numerical_rank, singular_values, svd

logger = logging.getLogger("OssCalc.Ascent")

Retract = Callable[[np.ndarray], Optional[np.ndarray]]


def salt_of(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def restart_rng(settings: SearchSettings, salt: int, restart: int) -> np.random.Generator:
    check_cancelled()
    return np.random.default_rng([settings.seed, salt, restart])


def retract_by(upper: Callable[[np.ndarray], float]) -> Retract:
    """按上界缩放到单位球边界；上界为 0 时返回 None"""

    def retract(point: np.ndarray) -> Optional[np.ndarray]:
        u = upper(point)
        if not np.isfinite(u) or u <= 0:
            return None
        return point / u

    return retract


# ========== 1. 投影上升 ==========


def ball_ascent(
    objective: Callable[[np.ndarray], float],
    gradient: Callable[[np.ndarray], np.ndarray],
    retract: Retract,
    seeds: Sequence[np.ndarray],
    shape: Tuple[int, int],
    settings: SearchSettings,
    salt: int,
) -> Tuple[float, Optional[np.ndarray]]:
    """
    在凸平衡球上最大化凸目标

    每步先试幂步（梯度方向直接收缩），再按 1, 1/4, 1/16 回溯；
    只接受严格改进。种子用完后用复高斯随机起点。
    """
    best_value, best_point = 0.0, None
    restarts = max(settings.ascent_restarts, len(seeds))

    for restart in range(restarts):
        check_cancelled()
        if restart < len(seeds):
            start = seeds[restart]
        else:
            start = crandn(shape, restart_rng(settings, salt, restart))
        point = retract(start)
        if point is None:
            continue
        value = objective(point)

        for _ in range(settings.ascent_steps):
            direction = gradient(point)
            d_norm = float(np.linalg.norm(direction))
            if d_norm == 0.0:
                break
            p_norm = float(np.linalg.norm(point))
            moved = False
            for step in (None, 1.0, 0.25, 0.0625):
                if step is None:
                    candidate = retract(direction)
                else:
                    candidate = retract(point + (step * p_norm / d_norm) * direction)
                if candidate is None:
                    continue
                candidate_value = objective(candidate)
                if candidate_value > value + 1e-13 * max(1.0, value):
                    point, value, moved = candidate, candidate_value, True
                    break
            if not moved:
                break

        if value > best_value:
            best_value, best_point = value, point

    return best_value, best_point


def pairing_value(z: np.ndarray, w: np.ndarray) -> float:
    """‖Zᵀ W‖_F：配对放大在 ℓ₂ 中的范数"""
    return float(np.linalg.norm(z.T @ w))


def pairing_ascent(
    z: np.ndarray,
    retract: Retract,
    seeds: Sequence[np.ndarray],
    width: int,
    settings: SearchSettings,
    salt: int,
) -> Tuple[float, Optional[np.ndarray]]:
    """max ‖ZᵀW‖_F，W 取遍收缩映射给出的球（k × width）"""
    return ball_ascent(
        objective=lambda w: pairing_value(z, w),
        gradient=lambda w: np.conj(z) @ (z.T @ w),
        retract=retract,
        seeds=seeds,
        shape=(z.shape[0], width),
        settings=settings,
        salt=salt,
    )


def spectral_seeds(z: np.ndarray, width: int) -> List[np.ndarray]:
    """conj(Z) 与 conj(U)：幂迭代和奇异向量两种起点，补零到 width 列"""
    u, s, _ = svd(z)
    r = max(1, int(np.sum(s > s[0] * 1e-12))) if s.size and s[0] > 0 else 1
    seeds = []
    for seed in (np.conj(u[:, :r]), np.conj(z)):
        seed = seed[:, :width]
        if seed.shape[1] < width:
            seed = np.hstack(
                [seed, np.zeros((seed.shape[0], width - seed.shape[1]), complex)]
            )
        seeds.append(seed)
    return seeds


# ========== 2. 分解上界 ==========


def _drop_null_pairs(xt: np.ndarray, at: np.ndarray, c: np.ndarray):
    row = np.linalg.norm(at, axis=1)
    keep = (c > 0) & (row > 0)
    return xt[:, keep], at[keep, :], c[keep], row[keep]


def factorization_upper(
    coords: np.ndarray,
    column_upper: Callable[[np.ndarray], float],
    settings: SearchSettings,
    salt: int,
) -> Tuple[float, str]:
    """
    ‖x‖ ≤ ‖α‖·(Σ_j ‖x̃_j‖₍₁₎²)^{1/2}，x = αx̃，坐标 X = X̃·αᵀ

    种子: 恒等、三种 SVD 对齐、随机 α（n×(n·r)，r ≤ factor_max_blocks）；
    每个种子交替做对角重标（平衡）和 α 的正交化。
    """
    k, n = coords.shape
    x_norm = float(np.linalg.norm(coords))
    candidates: List[Tuple[np.ndarray, np.ndarray, str]] = [
        (coords, np.eye(n, dtype=np.complex128), "identity")
    ]

    u, s, vh = svd(coords)
    r = numerical_rank(coords) if s.size else 0
    if r > 0:
        u, s, vh = u[:, :r], s[:r], vh[:r, :]
        root = np.sqrt(s)
        candidates += [
            (u * s, vh, "svd"),
            (u * root, root[:, None] * vh, "svd_sqrt"),
            (u, s[:, None] * vh, "svd_left"),
        ]

    for restart in range(settings.factor_restarts):
        rng = restart_rng(settings, salt, restart)
        blocks = 1 + restart % settings.factor_max_blocks
        at = crandn((n * blocks, n), rng)
        candidates.append((coords @ scipy.linalg.pinv(at), at, f"random_r{blocks}"))

    rounds = settings.factor_rounds if settings.factor_restarts > 0 else 1
    best, best_cert = np.inf, "none"
    for xt, at, label in candidates:
        for round_index in range(rounds + 1):
            c = np.array([column_upper(xt[:, j]) for j in range(xt.shape[1])])
            xt, at, c, row = _drop_null_pairs(xt, at, c)
            if xt.shape[1] == 0:
                break
            value = float(singular_values(at)[0] * np.linalg.norm(c))
            residual = float(np.linalg.norm(xt @ at - coords))
            if residual <= 1e-10 * (1.0 + x_norm) and value < best:
                best, best_cert = value, f"factorization:{label}"
            if round_index == rounds:
                break

            # 平衡 d_j = (‖at_j‖ / c_j)^{1/2}，再把 α 正交化
            d = np.sqrt(row / c)
            xt, at = xt * d, at / d[:, None]
            ua, sa, vha = svd(at)
            xt, at = xt @ (ua * sa), vha

    return best, best_cert


# ========== 3. 陪集下降 ==========


def coset_descent(
    fn: Callable[[np.ndarray], float],
    base: np.ndarray,
    directions: np.ndarray,
    settings: SearchSettings,
    salt: int,
) -> Tuple[float, np.ndarray]:
    """
    min_Z fn(base + directions·Z)，Z 为复矩阵

    Nelder–Mead 分段运行，每段 quotient_patience 次迭代，
    一段内相对改进 < quotient_tol 即停止；总迭代不超过 quotient_iterations。
    """
    r, n = directions.shape[1], base.shape[1]
    if r == 0:
        return fn(base), base
    size = r * n

    def unpack(theta: np.ndarray) -> np.ndarray:
        z = (theta[:size] + 1j * theta[size:]).reshape(r, n)
        return base + directions @ z

    def objective(theta: np.ndarray) -> float:
        return fn(unpack(theta))

    scale = max(float(np.linalg.norm(base)), 1e-12)
    best_theta = np.zeros(2 * size)
    best_value = objective(best_theta)

    for restart in range(settings.quotient_restarts):
        rng = restart_rng(settings, salt, restart)
        theta = best_theta.copy() if restart == 0 else rng.normal(scale=scale, size=2 * size)
        value = objective(theta)
        simplex = np.vstack([theta, theta + 0.1 * scale * np.eye(2 * size)])
        used = 0
        while used < settings.quotient_iterations:
            result = minimize(
                objective,
                theta,
                method="Nelder-Mead",
                options={
                    "maxiter": settings.quotient_patience,
                    "initial_simplex": simplex,
                    "xatol": 1e-14,
                    "fatol": 1e-14,
                },
            )
            used += settings.quotient_patience
            simplex = result.final_simplex[0]
            improved = value - float(result.fun)
            if result.fun < value:
                theta, value = result.x, float(result.fun)
            if improved <= settings.quotient_tol * max(value, 1e-300):
                break
        if value < best_value:
            best_value, best_theta = value, theta

    logger.debug(f"陪集下降完成: {best_value:.6g}")
    return best_value, unpack(best_theta)

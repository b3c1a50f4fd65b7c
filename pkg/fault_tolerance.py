"""
容错机制 - 异常体系、线性代数重试、看门狗
"""

import asyncio
import logging
import threading
import time
from contextlib import contextmanager
from functools import wraps
from typing import Optional, Tuple, Type

import numpy as np

logger = logging.getLogger("OssCalc.FaultTolerance")


# ========== 1. 异常体系 ==========


class OssCalcError(Exception):
    """计算器异常基类"""

    code = "oss_calc_error"


class DimensionError(OssCalcError):
    """维度不匹配"""

    code = "dimension_error"


class StructureError(OssCalcError):
    """结构标签不符合运算要求"""

    code = "structure_error"


class DescriptorError(OssCalcError):
    """空间描述符非法（基底秩亏、子空间为空等）"""

    code = "descriptor_error"


class PreconditionError(OssCalcError):
    """前置条件不满足（如元素不在单位球内）"""

    code = "precondition_error"


class RegistryError(OssCalcError):
    """未注册的属性测试套件"""

    code = "registry_error"


class InputError(OssCalcError):
    """输入文件解析失败"""

    code = "input_error"


class SuiteTimeoutError(OssCalcError):
    """属性测试套件运行超时"""

    code = "suite_timeout"


class TrialCancelled(SuiteTimeoutError):
    """套件超时后，进行中的试验在下一次重启前退出"""

    code = "trial_cancelled"


# ========== 2. 线性代数重试 ==========

LAPACK_DRIVERS = ("gesdd", "gesvd")


def with_linalg_retry(
    max_retries: int = 1,
    retryable_exceptions: Tuple[Type[Exception], ...] = (np.linalg.LinAlgError,),
):
    """
    SVD 重试装饰器

    gesdd 偶尔不收敛，失败后换用 gesvd 重试。
    被装饰函数必须接受关键字参数 lapack_driver。
    """

    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            last_error: Optional[Exception] = None
            for attempt in range(max_retries + 1):
                driver = LAPACK_DRIVERS[min(attempt, len(LAPACK_DRIVERS) - 1)]
                try:
                    return func(*args, lapack_driver=driver, **kwargs)
                except retryable_exceptions as e:
                    last_error = e
                    logger.warning(
                        f"⚠️ {func.__name__} 第 {attempt + 1} 次失败 (驱动 {driver}): {e}"
                    )
            logger.error(
                f"❌ {func.__name__} 重试 {max_retries} 次后仍失败: {last_error}"
            )
            raise last_error

        return wrapper

    return decorator


def handle_evaluation_errors(operation_name: str):
    """记录计算异常后原样抛出"""

    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            try:
                return func(*args, **kwargs)
            except TrialCancelled:
                raise
            except OssCalcError as e:
                logger.error(f"❌ {operation_name} 失败: {type(e).__name__}: {e}")
                raise

        return wrapper

    return decorator


# ========== 3. 看门狗 ==========


class Watchdog:
    """
    看门狗定时器 - 防止套件卡死

    用法:
        result = await Watchdog.protect(run_trials(), timeout=600, name="axioms")
    """

    def __init__(self, timeout: float = 600.0, name: str = "unnamed"):
        self.timeout = timeout
        self.name = name
        self.started_at = 0.0

    async def run(self, coro):
        """运行受看门狗保护的协程，超时转为 SuiteTimeoutError"""
        self.started_at = time.time()
        try:
            return await asyncio.wait_for(coro, timeout=self.timeout)
        except asyncio.TimeoutError:
            elapsed = time.time() - self.started_at
            logger.error(
                f"⏰ 看门狗 [{self.name}] 触发超时 "
                f"(已运行 {elapsed:.1f}秒 > {self.timeout}秒)"
            )
            raise SuiteTimeoutError(f"{self.name} 超过 {self.timeout} 秒未完成")

    @classmethod
    async def protect(cls, coro, timeout: float = 600.0, name: Optional[str] = None):
        """直接保护一个协程"""
        watchdog = cls(timeout=timeout, name=name or "protected")
        return await watchdog.run(coro)


# ========== 4. 取消 ==========

_scope = threading.local()


@contextmanager
def cancellation(event: Optional[threading.Event]):
    """在当前线程内登记取消事件，搜索循环每次重启前检查"""
    previous = getattr(_scope, "event", None)
    _scope.event = event
    try:
        yield
    finally:
        _scope.event = previous


def check_cancelled():
    event = getattr(_scope, "event", None)
    if event is not None and event.is_set():
        raise TrialCancelled("试验已取消")

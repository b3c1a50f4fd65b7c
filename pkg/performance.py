"""
评估计时 - 每个求值器 / 套件的调用次数与耗时分布
"""

import asyncio
import logging
import threading
import time
from collections import defaultdict
from functools import wraps
from typing import Any, Dict, List

import numpy as np
import psutil

logger = logging.getLogger("OssCalc.Performance")

SLOW_SECONDS = 1.0


class PerformanceMonitor:
    """线程安全：套件试验在线程池中并发调用被跟踪的求值器"""

    def __init__(self, slow_seconds: float = SLOW_SECONDS):
        self.slow_seconds = slow_seconds
        self._samples: Dict[str, List[float]] = defaultdict(list)
        self._slow = 0
        self._lock = threading.Lock()
        self._started = time.monotonic()

    def track(self, name: str):
        """记录被装饰函数每次调用的墙钟耗时（同步与协程均可）"""

        def decorator(func):
            if asyncio.iscoroutinefunction(func):

                @wraps(func)
                async def timed_async(*args, **kwargs):
                    t0 = time.perf_counter()
                    try:
                        return await func(*args, **kwargs)
                    finally:
                        self.record(name, time.perf_counter() - t0)

                return timed_async

            @wraps(func)
            def timed(*args, **kwargs):
                t0 = time.perf_counter()
                try:
                    return func(*args, **kwargs)
                finally:
                    self.record(name, time.perf_counter() - t0)

            return timed

        return decorator

    def record(self, name: str, seconds: float):
        with self._lock:
            self._samples[name].append(seconds)
            slow = seconds > self.slow_seconds
            if slow:
                self._slow += 1
        if slow:
            logger.warning(f"⏱️ {name} 耗时 {seconds:.3f}s")

    def calls(self, name: str) -> int:
        with self._lock:
            return len(self._samples.get(name, ()))

    def get_performance_report(self) -> Dict[str, Any]:
        with self._lock:
            snapshot = {name: np.asarray(s) for name, s in self._samples.items() if s}
            slow = self._slow

        operations = {
            name: {
                "calls": int(s.size),
                "total_s": float(s.sum()),
                "median_s": float(np.median(s)),
                "max_s": float(s.max()),
            }
            for name, s in sorted(snapshot.items())
        }
        return {
            "uptime_s": round(time.monotonic() - self._started, 3),
            "rss_mb": round(psutil.Process().memory_info().rss / 2**20, 1),
            "slow_calls": slow,
            "operations": operations,
        }

    def reset(self):
        with self._lock:
            self._samples.clear()
            self._slow = 0
            self._started = time.monotonic()


performance_monitor = PerformanceMonitor()

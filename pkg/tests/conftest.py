import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from config import SearchSettings  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


@pytest.fixture
def settings():
    """小预算，足够让精确结构和简单搜索收敛"""
    return SearchSettings(
        ascent_restarts=6,
        ascent_steps=60,
        factor_restarts=4,
        factor_rounds=6,
        quotient_iterations=200,
        quotient_restarts=2,
        inj_restarts=3,
    )


@pytest.fixture
def quick():
    return SearchSettings(lower_search=False, factor_restarts=0)

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from tvqe.dependencies import reset_dependencies  # noqa: E402
from tvqe.entity.model import ModelConfig  # noqa: E402
from tvqe.model.params import param_init  # noqa: E402
from tvqe.service.degrade import make_test_sequence  # noqa: E402
from tvqe.storage.memory import MemorySequenceStore  # noqa: E402


@pytest.fixture
def rng():
    """固定种子的随机数生成器"""
    return np.random.default_rng(1234)


@pytest.fixture
def toy_config():
    """R=1、维度 16、窗口 4、深度 [1,1,1]、f64"""
    return ModelConfig.toy()


@pytest.fixture
def toy_params(toy_config):
    return param_init(toy_config, seed=0)


@pytest.fixture
def memory_store():
    return MemorySequenceStore()


@pytest.fixture
def raw_sequence(memory_store):
    """内存中的 6 帧 32x32 合成原始序列"""
    frames = make_test_sequence(6, 32, 32, seed=3)
    return memory_store.write_sequence("raw.yuv", 32, 32, frames)


@pytest.fixture(autouse=True)
def _fresh_dependencies():
    reset_dependencies()
    yield
    reset_dependencies()

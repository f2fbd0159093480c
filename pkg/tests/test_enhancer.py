"""
推理服务的测试
"""
import os

import numpy as np
import pytest

from tvqe.entity.errors import DimensionError
from tvqe.service.enhancer import QualityEnhancer


@pytest.fixture
def identity_params(toy_params):
    params = toy_params.copy()
    for path in ("caqe.rec.weight", "caqe.rec.bias"):
        params.set(path, np.zeros(params[path].shape))
    return params


class TestEnhancer:

    def test_threads_match_serial(self, toy_config, toy_params, rng):
        planes = rng.uniform(0, 1, (5, 16, 16))
        serial = QualityEnhancer(toy_config, toy_params, workers=1).enhance_planes(planes)
        threaded = QualityEnhancer(toy_config, toy_params, workers=3).enhance_planes(planes)
        np.testing.assert_array_equal(serial, threaded)

    def test_output_clipped(self, toy_config, toy_params, rng):
        planes = rng.uniform(0, 1, (2, 16, 16))
        out = QualityEnhancer(toy_config, toy_params).enhance_planes(planes)
        assert out.shape == planes.shape
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_identity_network(self, toy_config, identity_params, rng):
        planes = rng.uniform(0, 1, (3, 16, 16))
        out = QualityEnhancer(toy_config, identity_params).enhance_planes(planes)
        np.testing.assert_array_equal(out, planes)

    def test_empty_sequence(self, toy_config, toy_params):
        out = QualityEnhancer(toy_config, toy_params).enhance_planes(np.zeros((0, 16, 16)))
        assert out.shape == (0, 16, 16)

    def test_rank_checked(self, toy_config, toy_params):
        with pytest.raises(DimensionError):
            QualityEnhancer(toy_config, toy_params).enhance_planes(np.zeros((16, 16)))

    def test_enhance_sequence(self, toy_config, identity_params, memory_store, raw_sequence, tmp_path):
        enhancer = QualityEnhancer(toy_config, identity_params, workers=2)
        out = enhancer.enhance_sequence(memory_store, raw_sequence, "enhanced.yuv", str(tmp_path / "png"))
        assert (out.width, out.height, out.frame_count) == (32, 32, 6)
        assert memory_store.get_content("enhanced.yuv") == memory_store.get_content("raw.yuv")
        assert sorted(os.listdir(tmp_path / "png"))[0] == "enhanced_0000.png"
        assert len(os.listdir(tmp_path / "png")) == 6

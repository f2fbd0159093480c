"""
完整网络与参数集合的测试
"""
import numpy as np
import pytest

from tvqe.autograd.tensor import Tape, Tensor, backward
from tvqe.entity.clip import ClipWindow
from tvqe.entity.errors import ConfigMismatchError, DimensionError, UsageError
from tvqe.entity.model import ModelConfig
from tvqe.entity.sequence import JCTVC_SEQUENCES, desk_extent
from tvqe.entity.training import LossConfig
from tvqe.model.network import caqe_forward, padded_extent, sstf_forward, tvqe_forward
from tvqe.model.params import check_compatible, count_parameters, param_init, parameter_specs
from tvqe.service.losses import combined_loss


def zero_reconstruction(params):
    params = params.copy()
    for path in ("caqe.rec.weight", "caqe.rec.bias"):
        params.set(path, np.zeros(params[path].shape))
    return params


class TestForward:

    def test_output_shape(self, toy_config, toy_params, rng):
        frames = rng.uniform(0, 1, (3, 16, 16))
        assert tvqe_forward(frames, toy_params, toy_config).shape == (1, 1, 16, 16)

    def test_non_multiple_extent_is_padded_and_cropped(self, toy_config, toy_params, rng):
        frames = rng.uniform(0, 1, (3, 18, 22))
        assert padded_extent(18, 22, toy_config) == (32, 32)
        assert sstf_forward(frames, toy_params, toy_config).shape == (1, 16, 18, 22)
        assert tvqe_forward(frames, toy_params, toy_config).shape == (1, 1, 18, 22)

    def test_clip_window_input(self, toy_config, toy_params, rng):
        frames = rng.uniform(0, 1, (3, 16, 16))
        a = tvqe_forward(ClipWindow(frames, 1), toy_params, toy_config).data
        b = tvqe_forward(frames, toy_params, toy_config).data
        np.testing.assert_array_equal(a, b)

    def test_batched_input(self, toy_config, toy_params, rng):
        frames = rng.uniform(0, 1, (2, 3, 16, 16))
        out = tvqe_forward(frames, toy_params, toy_config).data
        single = tvqe_forward(frames[1], toy_params, toy_config).data
        np.testing.assert_allclose(out[1:], single, atol=1e-12)

    def test_zero_reconstruction_is_identity(self, toy_config, toy_params, rng):
        frames = rng.uniform(0, 1, (3, 16, 16))
        out = tvqe_forward(frames, zero_reconstruction(toy_params), toy_config).data
        np.testing.assert_array_equal(out[0, 0], frames[1])

    @pytest.mark.parametrize("seed", range(20))
    def test_identity_across_configs(self, seed):
        rng = np.random.default_rng(seed)
        config = ModelConfig.toy(
            radius=int(rng.integers(0, 3)), window_size=int(rng.choice([2, 4])), embed_dim=8,
            mdta_heads=int(rng.choice([1, 2])), num_restormers=int(rng.integers(1, 3)),
        )
        h, w = (int(v) for v in rng.integers(6, 21, size=2))
        frames = rng.uniform(0, 1, (config.num_frames, h, w))
        params = zero_reconstruction(param_init(config, seed))
        out = tvqe_forward(frames, params, config).data
        np.testing.assert_array_equal(out[0, 0], frames[config.radius])

    @pytest.mark.parametrize("neighbour", [0, 2])
    def test_neighbour_frames_are_fused(self, toy_config, toy_params, rng, neighbour):
        frames = rng.uniform(0, 1, (3, 16, 16))
        changed = frames.copy()
        changed[neighbour] = rng.uniform(0, 1, (16, 16))
        a = tvqe_forward(frames, toy_params, toy_config).data
        b = tvqe_forward(changed, toy_params, toy_config).data
        assert not np.allclose(a, b)

    def test_gradients_reach_every_parameter(self, toy_config, rng):
        params = param_init(toy_config, 0)
        assert np.any(params["caqe.rec.weight"].data != 0)
        params.requires_grad_(True)
        frames = rng.uniform(0, 1, (2, 3, 32, 32))
        target = rng.uniform(0, 1, (2, 1, 32, 32))
        with Tape() as tape:
            pred = tvqe_forward(Tensor(frames), params, toy_config)
            loss, _ = combined_loss(pred, Tensor(target), LossConfig(alpha=1.0, beta=1.0))
        backward(loss, tape)

        dead = [path for path, t in params.items() if t.grad is None or not np.any(t.grad != 0)]
        assert dead == []
        nonzero = sum(int(np.count_nonzero(t.grad)) for t in params.values())
        assert nonzero >= 0.99 * params.num_elements()

    def test_skips_matter(self, toy_config, toy_params, rng):
        frames = rng.uniform(0, 1, (3, 16, 16))
        with_skips = sstf_forward(frames, toy_params, toy_config).data
        without = sstf_forward(frames, toy_params, toy_config, use_skips=False).data
        assert not np.allclose(with_skips, without)

    def test_wrong_frame_count(self, toy_config, toy_params):
        with pytest.raises(UsageError):
            tvqe_forward(np.zeros((5, 16, 16)), toy_params, toy_config)

    def test_caqe_extent_mismatch(self, toy_config, toy_params):
        x_m = Tensor(np.zeros((1, 16, 8, 8)))
        with pytest.raises(DimensionError):
            caqe_forward(x_m, np.zeros((8, 6)), toy_params, toy_config)

    def test_deterministic(self, toy_config, toy_params, rng):
        frames = rng.uniform(0, 1, (3, 16, 16))
        a = tvqe_forward(frames, toy_params, toy_config).data
        b = tvqe_forward(frames, toy_params, toy_config).data
        np.testing.assert_array_equal(a, b)


class TestDeskExtents:

    def test_all_sequences_pad_cleanly(self):
        config = ModelConfig()
        assert len(JCTVC_SEQUENCES) == 18
        for name in JCTVC_SEQUENCES:
            w, h = desk_extent(name)
            assert w % 2 == 0 and h % 2 == 0
            ph, pw = padded_extent(h, w, config)
            assert ph % config.pad_multiple == 0 and pw % config.pad_multiple == 0
            assert 0 <= ph - h < config.pad_multiple

    @pytest.mark.slow
    @pytest.mark.parametrize("radius", [1, 2, 3])
    @pytest.mark.parametrize("name", sorted(JCTVC_SEQUENCES))
    def test_forward_at_desk_extent(self, name, radius):
        config = ModelConfig.toy(radius=radius)
        w, h = desk_extent(name)
        frames = np.random.default_rng(radius).uniform(0, 1, (config.num_frames, h, w))
        out = tvqe_forward(frames, param_init(config, 0), config)
        assert out.shape == (1, 1, h, w)


class TestParams:

    @pytest.mark.parametrize("config", [ModelConfig(), ModelConfig.toy(),
                                        ModelConfig.toy(mlp_ratio=2.0, num_restormers=2, patch=1)])
    def test_count_matches_specs(self, config):
        total = sum(int(np.prod(shape)) for _, shape, _ in parameter_specs(config))
        assert count_parameters(config) == total
        assert param_init(config).num_elements() == total

    def test_paths_are_unique(self):
        paths = [p for p, _, _ in parameter_specs(ModelConfig())]
        assert len(paths) == len(set(paths))

    def test_init_is_seeded(self, toy_config):
        a = param_init(toy_config, seed=5)
        b = param_init(toy_config, seed=5)
        c = param_init(toy_config, seed=6)
        path = "sstf.enc.stage1.block0.attn.qkv.weight"
        np.testing.assert_array_equal(a[path].data, b[path].data)
        assert not np.array_equal(a[path].data, c[path].data)

    def test_init_kinds(self, toy_params):
        assert np.all(toy_params["sstf.enc.stage1.block0.norm1.weight"].data == 1.0)
        assert np.all(toy_params["sstf.enc.stage1.block0.norm1.bias"].data == 0.0)
        assert np.all(toy_params["sstf.enc.stage1.block0.attn.rel_pos_bias"].data == 0.0)
        w = toy_params["caqe.rec.weight"].data
        assert np.abs(w).max() <= 0.04

    def test_dtype_follows_config(self):
        params = param_init(ModelConfig.toy(dtype="float32"))
        assert all(t.dtype == np.float32 for t in params.values())

    def test_check_compatible(self, toy_config, toy_params):
        check_compatible(toy_config, dict(toy_params.items()))

        missing = dict(toy_params.items())
        missing.pop("caqe.rec.bias")
        with pytest.raises(ConfigMismatchError, match="caqe.rec.bias"):
            check_compatible(toy_config, missing)

        extra = dict(toy_params.items())
        extra["bogus.weight"] = Tensor(np.zeros(1))
        with pytest.raises(ConfigMismatchError, match="bogus"):
            check_compatible(toy_config, extra)

        with pytest.raises(ConfigMismatchError):
            check_compatible(ModelConfig.toy(embed_dim=8), dict(toy_params.items()))

    def test_unknown_path(self, toy_params):
        with pytest.raises(UsageError):
            toy_params["nope"]

    def test_invalid_config_rejected(self):
        with pytest.raises(ValueError):
            ModelConfig(depths=(2, 2))
        with pytest.raises(ValueError):
            ModelConfig(embed_dim=48, heads=(5, 2, 2))

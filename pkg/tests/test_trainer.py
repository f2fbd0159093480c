"""
两阶段训练服务的测试
"""
import numpy as np
import pytest

from tvqe.entity.clip import TrainingPair
from tvqe.entity.errors import TrainingDivergedError, UsageError
from tvqe.entity.sequence import DegradeProfile
from tvqe.entity.training import TrainSchedule
from tvqe.model.network import tvqe_forward
from tvqe.model.params import param_init
from tvqe.repository.checkpoint_repo import MemoryCheckpointRepo, encode_checkpoint
from tvqe.service.dataset import make_batch, sample_patches_from_planes
from tvqe.service.degrade import make_test_sequence, synth_degrade
from tvqe.service.metrics import delta_metrics
from tvqe.service.trainer import TwoStageTrainer, two_stage_train


@pytest.fixture
def pairs():
    raw = make_test_sequence(4, 24, 24, seed=5) / 255.0
    compressed = np.clip(raw + np.random.default_rng(9).normal(0, 0.03, raw.shape), 0, 1)
    return sample_patches_from_planes(compressed, raw, crop=8, count=4, radius=1, seed=0)


def schedule(**overrides):
    fields = dict(stage1_steps=2, stage2_steps=1, lr=1e-3, batch_size=2, crop=8, seed=0, log_every=1)
    fields.update(overrides)
    return TrainSchedule(**fields)


class TestTrainer:

    def test_zero_steps_returns_initial_params(self, toy_config):
        result = two_stage_train(toy_config, [], schedule(stage1_steps=0, stage2_steps=0))
        assert result.history == []
        init = param_init(toy_config, 0)
        for path, tensor in init.items():
            np.testing.assert_array_equal(result.checkpoint.params[path].data, tensor.data)

    def test_empty_dataset(self, toy_config):
        with pytest.raises(UsageError):
            two_stage_train(toy_config, [], schedule())

    def test_stage_transition(self, toy_config, pairs):
        result = two_stage_train(toy_config, pairs, schedule())
        assert [r.step for r in result.history] == [0, 1, 2]
        assert [r.stage for r in result.history] == [1, 1, 2]
        assert (result.history[0].alpha, result.history[0].beta) == (1.0, 0.0)
        assert (result.history[2].alpha, result.history[2].beta) == (0.0, 1.0)
        assert result.history[2].total == pytest.approx(result.history[2].mse)
        assert result.checkpoint.optim.step == 3

    def test_same_seed_is_bit_identical(self, toy_config, pairs):
        a = two_stage_train(toy_config, pairs, schedule())
        b = two_stage_train(toy_config, pairs, schedule())
        assert [r.total for r in a.history] == [r.total for r in b.history]
        assert encode_checkpoint(a.checkpoint) == encode_checkpoint(b.checkpoint)

    def test_seed_changes_run(self, toy_config, pairs):
        a = two_stage_train(toy_config, pairs, schedule(seed=0))
        b = two_stage_train(toy_config, pairs, schedule(seed=1))
        assert encode_checkpoint(a.checkpoint) != encode_checkpoint(b.checkpoint)

    def test_periodic_checkpoints_and_callback(self, toy_config, pairs):
        repo = MemoryCheckpointRepo()
        seen = []
        trainer = TwoStageTrainer(toy_config, schedule(checkpoint_every=2), repo, "ckpt", callback=seen.append)
        result = trainer.train(pairs)
        assert result.checkpoint_paths == ["ckpt/ckpt_000002.tvqe"]
        assert repo.paths() == ["ckpt/ckpt_000002.tvqe"]
        assert repo.load("ckpt/ckpt_000002.tvqe", toy_config).optim.step == 2
        assert [r.step for r in seen] == [0, 1, 2]

    def test_gradient_clipping_runs(self, toy_config, pairs):
        result = two_stage_train(toy_config, pairs, schedule(clip_grad_norm=1e-3, augment=False))
        assert len(result.history) == 3

    def test_divergence_reported(self, toy_config):
        bad = [TrainingPair(np.full((3, 8, 8), np.inf), np.zeros((8, 8)))]
        with pytest.raises(TrainingDivergedError) as info:
            two_stage_train(toy_config, bad, schedule())
        assert info.value.step == 0
        assert info.value.exit_code == 3
        assert "op" in info.value.components

    def test_divergence_reports_current_step(self, toy_config, pairs):
        bad = TrainingPair(np.full((3, 8, 8), np.inf), np.zeros((8, 8)))
        steps = []
        for seed in range(10):
            seen = []
            trainer = TwoStageTrainer(toy_config, schedule(stage1_steps=20, batch_size=1, augment=False, seed=seed),
                                      callback=seen.append)
            with pytest.raises(TrainingDivergedError) as info:
                trainer.train([pairs[0], bad])
            assert info.value.step == len(seen)
            assert all(np.isnan(info.value.components[k]) for k in ("charbonnier", "mse", "total"))
            assert info.value.components["op"]
            steps.append(info.value.step)
        assert max(steps) > 0

    @pytest.mark.slow
    def test_overfits_degraded_patches(self, toy_config):
        raw = make_test_sequence(10, 32, 32, seed=3) / 255.0
        profile = DegradeProfile(q=37)
        compressed = np.stack([synth_degrade(frame, profile) for frame in raw])
        train_set = [TrainingPair(compressed[t - 1:t + 2], raw[t]) for t in range(1, 9)]

        sched = schedule(stage1_steps=300, stage2_steps=0, lr=2e-3, batch_size=8, augment=False, log_every=50)
        result = two_stage_train(toy_config, train_set, sched)
        losses = [r.charbonnier for r in result.history]
        assert losses[-1] < 0.2 * losses[0]

        frames, targets = make_batch(train_set)
        enhanced = np.clip(tvqe_forward(frames, result.checkpoint.params, toy_config).data[:, 0], 0.0, 1.0)
        report = delta_metrics(targets[:, 0], frames[:, 1], enhanced)
        assert report.delta_psnr > 1.0

"""
时间窗口与训练块采样的测试
"""
import numpy as np
import pytest

from tvqe.entity.clip import ClipWindow, TrainingPair
from tvqe.entity.errors import FrameIndexError, UsageError
from tvqe.service.dataset import (
    apply_transform, augment, clip_from_planes, clip_window, make_batch, sample_patches,
    sample_patches_from_planes, window_indices,
)


@pytest.fixture
def planes(rng):
    return rng.uniform(0, 1, (5, 12, 10))


class TestWindow:

    def test_interior(self):
        assert window_indices(2, 1, 5) == [1, 2, 3]

    def test_boundary_replicated(self):
        assert window_indices(0, 2, 5) == [0, 0, 0, 1, 2]
        assert window_indices(4, 2, 5) == [2, 3, 4, 4, 4]

    def test_short_sequence(self):
        assert window_indices(0, 3, 1) == [0] * 7

    def test_out_of_range(self):
        with pytest.raises(FrameIndexError):
            window_indices(5, 1, 5)

    def test_clip_from_planes(self, planes):
        clip = clip_from_planes(planes, 0, 1)
        assert clip.frames.shape == (3, 12, 10)
        assert clip.timestamps == [0, 0, 1]
        np.testing.assert_array_equal(clip.center, planes[0])
        assert clip.radius == 1
        assert clip.extent == (12, 10)

    def test_clip_from_store(self, memory_store, raw_sequence):
        clip = clip_window(memory_store, raw_sequence, 5, 2)
        assert clip.timestamps == [3, 4, 5, 5, 5]
        np.testing.assert_array_equal(clip.center, memory_store.read_y_plane(raw_sequence, 5))

    def test_clip_window_validates_shape(self):
        with pytest.raises(ValueError):
            ClipWindow(np.zeros((4, 2, 2)), target_index=1)


class TestSampling:

    def test_aligned_positions(self, planes, rng):
        compressed = planes
        raw = planes + 1.0
        pairs = sample_patches_from_planes(compressed, raw, crop=4, count=6, radius=1, seed=3)
        assert len(pairs) == 6
        for pair in pairs:
            t, y, x = pair.origin
            assert pair.frames.shape == (3, 4, 4)
            np.testing.assert_array_equal(pair.target, raw[t, y:y + 4, x:x + 4])
            np.testing.assert_array_equal(pair.center, compressed[t, y:y + 4, x:x + 4])

    def test_seeded(self, planes):
        a = sample_patches_from_planes(planes, planes, 4, 5, 1, seed=7)
        b = sample_patches_from_planes(planes, planes, 4, 5, 1, seed=7)
        assert [p.origin for p in a] == [p.origin for p in b]

    def test_crop_too_large(self, planes):
        with pytest.raises(UsageError):
            sample_patches_from_planes(planes, planes, 11, 1, 1)

    def test_misaligned(self, planes):
        with pytest.raises(UsageError):
            sample_patches_from_planes(planes, planes[:4], 4, 1, 1)

    def test_from_store(self, memory_store, raw_sequence):
        pairs = sample_patches(memory_store, raw_sequence, raw_sequence, crop=8, count=3, radius=1)
        assert all(p.frames.shape == (3, 8, 8) for p in pairs)


class TestAugmentation:

    def test_transform_is_joint(self, rng):
        frames = rng.uniform(0, 1, (3, 4, 4))
        pair = TrainingPair(frames, frames[1].copy())
        for flip_h in (False, True):
            for flip_v in (False, True):
                for rot in range(4):
                    out = apply_transform(pair, flip_h, flip_v, rot)
                    np.testing.assert_array_equal(out.center, out.target)

    def test_rotation_matches_numpy(self, rng):
        frames = rng.uniform(0, 1, (1, 4, 4))
        out = apply_transform(TrainingPair(frames, frames[0]), False, False, 1)
        np.testing.assert_array_equal(out.target, np.rot90(frames[0]))

    def test_non_square_rotation(self, rng):
        frames = rng.uniform(0, 1, (1, 4, 6))
        with pytest.raises(UsageError):
            apply_transform(TrainingPair(frames, frames[0]), False, False, 1)
        apply_transform(TrainingPair(frames, frames[0]), True, True, 2)

    def test_augment_preserves_values(self, rng):
        frames = rng.uniform(0, 1, (3, 4, 4))
        out = augment(TrainingPair(frames, frames[1].copy()), np.random.default_rng(0))
        np.testing.assert_array_equal(np.sort(out.frames.ravel()), np.sort(frames.ravel()))

    def test_make_batch(self, planes):
        pairs = sample_patches_from_planes(planes, planes, 4, 3, 1)
        frames, targets = make_batch(pairs)
        assert frames.shape == (3, 3, 4, 4)
        assert targets.shape == (3, 1, 4, 4)

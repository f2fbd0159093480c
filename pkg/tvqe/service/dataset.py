"""
训练与推理的数据组装：时间窗口、随机裁剪块、联合数据增强。
"""
import logging
from typing import List, Sequence, Tuple

import numpy as np

from tvqe.entity.clip import ClipWindow, TrainingPair
from tvqe.entity.errors import FrameIndexError, UsageError
from tvqe.entity.sequence import YuvSequence
from tvqe.storage.base import SequenceStore

logger = logging.getLogger(__name__)


def window_indices(t: int, radius: int, frame_count: int) -> List[int]:
    """t-R..t+R，越界的序号截断到 [0, T-1]"""
    if not 0 <= t < frame_count:
        raise FrameIndexError(f"frame {t} out of range for {frame_count}-frame sequence")
    return [min(max(i, 0), frame_count - 1) for i in range(t - radius, t + radius + 1)]


def clip_from_planes(planes: np.ndarray, t: int, radius: int) -> ClipWindow:
    """
    从已读入的 [T, H, W] 平面组装时间窗口

    Args:
        planes: 全部亮度平面
        t: 目标帧序号
        radius: 窗口半径 R

    Returns:
        ClipWindow: 2R+1 帧窗口，中心为 X_t
    """
    indices = window_indices(t, radius, planes.shape[0])
    return ClipWindow(planes[indices], target_index=radius, timestamps=indices)


def clip_window(store: SequenceStore, seq: YuvSequence, t: int, radius: int) -> ClipWindow:
    """
    读取以 t 为中心的 2R+1 帧窗口，序列边界处复制边界帧

    Args:
        store: 序列存储
        seq: 序列描述
        t: 目标帧序号
        radius: 窗口半径 R

    Returns:
        ClipWindow: 时间窗口
    """
    indices = window_indices(t, radius, seq.frame_count)
    cache = {i: store.read_y_plane(seq, i) for i in sorted(set(indices))}
    frames = np.stack([cache[i] for i in indices])
    return ClipWindow(frames, target_index=radius, timestamps=indices)


def sample_patches_from_planes(
    compressed: np.ndarray,
    raw: np.ndarray,
    crop: int,
    count: int,
    radius: int,
    seed: int = 0,
) -> List[TrainingPair]:
    """
    在对齐的压缩/原始序列上随机裁剪训练块

    所有 2R+1 帧压缩帧与原始中心帧使用相同的空间位置。

    Args:
        compressed: [T, H, W] 压缩序列
        raw: [T, H, W] 原始序列
        crop: 裁剪边长
        count: 块数
        radius: 窗口半径 R
        seed: 随机种子

    Returns:
        List[TrainingPair]: 训练块

    Raises:
        UsageError: 序列不对齐或裁剪尺寸大于帧时抛出
    """
    if compressed.shape != raw.shape:
        raise UsageError(f"compressed {compressed.shape} and raw {raw.shape} sequences are not aligned")
    frames, height, width = compressed.shape
    if frames == 0:
        raise UsageError("cannot sample patches from an empty sequence")
    if crop > height or crop > width:
        raise UsageError(f"crop {crop} larger than frame {width}x{height}")

    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(count):
        t = int(rng.integers(0, frames))
        y = int(rng.integers(0, height - crop + 1))
        x = int(rng.integers(0, width - crop + 1))
        indices = window_indices(t, radius, frames)
        pairs.append(TrainingPair(
            frames=compressed[indices, y:y + crop, x:x + crop].copy(),
            target=raw[t, y:y + crop, x:x + crop].copy(),
            origin=(t, y, x),
        ))
    return pairs


def sample_patches(
    store: SequenceStore,
    compressed: YuvSequence,
    raw: YuvSequence,
    crop: int,
    count: int,
    radius: int,
    seed: int = 0,
) -> List[TrainingPair]:
    """从存储中的两个对齐序列采样训练块，参数见 sample_patches_from_planes"""
    if (compressed.width, compressed.height, compressed.frame_count) != (raw.width, raw.height, raw.frame_count):
        raise UsageError(f"sequences {compressed.path} and {raw.path} are not aligned")
    pairs = sample_patches_from_planes(
        store.read_y_planes(compressed), store.read_y_planes(raw), crop, count, radius, seed,
    )
    logger.info(f"采样训练块: {count} 个 {crop}x{crop} 块, R={radius}, seed={seed}")
    return pairs


def apply_transform(pair: TrainingPair, flip_h: bool, flip_v: bool, rotations: int) -> TrainingPair:
    """
    对压缩帧和原始帧施加相同的翻转与旋转

    Args:
        pair: 训练块
        flip_h: 水平翻转
        flip_v: 垂直翻转
        rotations: 逆时针旋转 90° 的次数

    Raises:
        UsageError: 非方形块要求旋转 90°/270° 时抛出
    """
    frames, target = pair.frames, pair.target
    if rotations % 2 and target.shape[0] != target.shape[1]:
        raise UsageError(f"cannot rotate a non-square {target.shape} patch by 90 degrees")
    if flip_h:
        frames, target = frames[:, :, ::-1], target[:, ::-1]
    if flip_v:
        frames, target = frames[:, ::-1, :], target[::-1, :]
    if rotations % 4:
        frames = np.rot90(frames, rotations, axes=(1, 2))
        target = np.rot90(target, rotations)
    return TrainingPair(np.ascontiguousarray(frames), np.ascontiguousarray(target), pair.origin)


def augment(pair: TrainingPair, rng: np.random.Generator) -> TrainingPair:
    """随机翻转（水平/垂直）与旋转（0/90/180/270），联合作用于整个训练块"""
    flip_h, flip_v = bool(rng.integers(2)), bool(rng.integers(2))
    rotations = int(rng.integers(4))
    return apply_transform(pair, flip_h, flip_v, rotations)


def make_batch(pairs: Sequence[TrainingPair]) -> Tuple[np.ndarray, np.ndarray]:
    """
    把训练块堆叠成批

    Returns:
        Tuple[np.ndarray, np.ndarray]: ([B, 2R+1, c, c], [B, 1, c, c])
    """
    frames = np.stack([p.frames for p in pairs])
    targets = np.stack([p.target for p in pairs])[:, None]
    return frames, targets

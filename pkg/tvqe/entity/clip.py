from typing import List, Optional, Tuple

import numpy as np


class ClipWindow:
    """
    以目标帧 X_t 为中心的 2R+1 帧亮度输入 V_t。
    这是一个领域模型类，独立于存储实现。
    """
    def __init__(self, frames: np.ndarray, target_index: int, timestamps: Optional[List[int]] = None):
        frames = np.asarray(frames)
        if frames.ndim != 3:
            raise ValueError(f"clip frames must be [2R+1, H, W], got shape {frames.shape}")
        if frames.shape[0] != 2 * target_index + 1:
            raise ValueError(f"{frames.shape[0]} frames cannot be centred on index {target_index}")
        self.frames = frames                  # [2R+1, H, W]，取值 [0, 1]
        self.target_index = target_index      # R
        self.timestamps = list(timestamps) if timestamps is not None else list(range(frames.shape[0]))

    @property
    def radius(self) -> int:
        return self.target_index

    @property
    def center(self) -> np.ndarray:
        """目标帧 X_t"""
        return self.frames[self.target_index]

    @property
    def extent(self) -> Tuple[int, int]:
        return self.frames.shape[1], self.frames.shape[2]


class TrainingPair:
    """
    一个训练样本：压缩帧窗口的裁剪块与原始中心帧的同位置裁剪块。
    """
    def __init__(self, frames: np.ndarray, target: np.ndarray, origin: Tuple[int, int, int] = (0, 0, 0)):
        self.frames = frames      # [2R+1, crop, crop] 压缩帧
        self.target = target      # [crop, crop] 原始帧
        self.origin = origin      # (t, y, x) 采样坐标

    @property
    def center(self) -> np.ndarray:
        return self.frames[self.frames.shape[0] // 2]

from typing import List, Literal, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from tvqe.entity.errors import DimensionError, UsageError


class ModelConfig(BaseModel):
    """
    TVQE 网络的超参数记录。
    默认配置：窗口 8，Swin-TB 数量 [2, 2, 2]，注意力头 [2, 2, 2]，
    嵌入维度 48，MLP-ratio 1，Restormer 数量 4。
    """
    radius: int = Field(3, ge=0)              # 目标帧前后各 R 帧
    window_size: int = Field(8, ge=1)
    depths: Tuple[int, ...] = (2, 2, 2)
    heads: Tuple[int, ...] = (2, 2, 2)
    embed_dim: int = Field(48, ge=1)
    mlp_ratio: float = Field(1.0, gt=0)
    num_restormers: int = Field(4, ge=0)
    patch: int = Field(2, ge=1)
    mdta_heads: int = Field(1, ge=1)
    gdfn_expansion: float = Field(2.0, gt=0)
    ln_eps: float = Field(1e-5, gt=0)
    dtype: Literal["float32", "float64"] = "float32"

    class Config:
        """配置元数据"""
        frozen = True
        extra = "forbid"

    @model_validator(mode="after")
    def _check_algebra(self) -> "ModelConfig":
        if len(self.depths) != 3 or len(self.heads) != 3:
            raise ValueError(f"depths and heads must have 3 entries, got {self.depths} / {self.heads}")
        if any(d < 1 for d in self.depths) or any(h < 1 for h in self.heads):
            raise ValueError("depths and heads must be positive")
        for k, h in enumerate(self.heads):
            dim = self.embed_dim * 2 ** k
            if dim % h != 0:
                raise ValueError(f"stage {k + 1} width {dim} is not divisible by {h} heads")
        if self.embed_dim % self.mdta_heads != 0:
            raise ValueError(f"embed_dim {self.embed_dim} is not divisible by mdta_heads {self.mdta_heads}")
        return self

    @property
    def num_frames(self) -> int:
        """输入窗口帧数 2R+1"""
        return 2 * self.radius + 1

    @property
    def stage_dims(self) -> List[int]:
        """编码器三个阶段的通道宽度"""
        return [self.embed_dim * 2 ** k for k in range(3)]

    @property
    def pad_multiple(self) -> int:
        """帧尺寸需要被反射填充到的倍数：窗口 × patch × 2^(阶段数-1)"""
        return self.window_size * self.patch * 2 ** (len(self.depths) - 1)

    @property
    def np_dtype(self) -> np.dtype:
        return np.dtype(self.dtype)

    def mlp_hidden(self, dim: int) -> int:
        """Swin-TB 中 MLP 隐藏层宽度"""
        return max(1, int(round(self.mlp_ratio * dim)))

    def gdfn_hidden(self) -> int:
        """GDFN 隐藏层宽度"""
        return max(1, int(round(self.gdfn_expansion * self.embed_dim)))

    @classmethod
    def toy(cls, **overrides) -> "ModelConfig":
        """
        用于梯度检查和过拟合测试的小规模配置

        Args:
            overrides: 覆盖的字段

        Returns:
            ModelConfig: R=1、维度16、窗口4、深度[1,1,1]、f64 的配置
        """
        fields = dict(radius=1, window_size=4, depths=(1, 1, 1), heads=(2, 2, 2),
                      embed_dim=16, dtype="float64")
        fields.update(overrides)
        return cls(**fields)


class WindowGrid:
    """
    某一阶段特征图上的窗口划分。
    shift 只能是 0 或 window_size // 2；特征图不大于窗口时强制为 0。
    """
    def __init__(self, height: int, width: int, window_size: int, shift: int = 0):
        if window_size <= 0:
            raise UsageError(f"window size must be positive, got {window_size}")
        if height % window_size != 0 or width % window_size != 0:
            raise DimensionError(f"feature map {height}x{width} is not a multiple of window {window_size}")
        if shift not in (0, window_size // 2):
            raise UsageError(f"shift must be 0 or {window_size // 2}, got {shift}")
        if min(height, width) <= window_size:
            shift = 0
        self.height = height
        self.width = width
        self.window_size = window_size
        self.shift = shift

    @property
    def num_windows_h(self) -> int:
        return self.height // self.window_size

    @property
    def num_windows_w(self) -> int:
        return self.width // self.window_size

    @property
    def num_windows(self) -> int:
        return self.num_windows_h * self.num_windows_w

    @property
    def tokens_per_window(self) -> int:
        return self.window_size * self.window_size

    def __repr__(self) -> str:
        return f"WindowGrid({self.height}x{self.width}, ws={self.window_size}, shift={self.shift})"

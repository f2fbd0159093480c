from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field


class InfinitePSNR:
    """
    MSE 为 0 时 PSNR 的特殊标记。
    它不是数字，参与均值计算前必须被排除。
    """
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "PSNR_INF"

    def __str__(self) -> str:
        return "inf"


PSNR_INF = InfinitePSNR()


def is_infinite(value) -> bool:
    """判断 PSNR 值是否为无穷标记"""
    return value is PSNR_INF


class RDPoint(BaseModel):
    """率失真曲线上的一个点"""
    rate: float = Field(..., gt=0)   # kbps
    psnr: float                       # dB

    class Config:
        """配置元数据"""
        frozen = True


class QualitySeries:
    """
    逐帧质量序列，用于观察质量波动。
    """
    def __init__(
        self,
        degraded_psnr: List,
        enhanced_psnr: List,
        degraded_ssim: Optional[List[float]] = None,
        enhanced_ssim: Optional[List[float]] = None,
    ):
        if len(degraded_psnr) != len(enhanced_psnr):
            raise ValueError("quality series must have equal lengths")
        self.frames = list(range(len(degraded_psnr)))
        self.degraded_psnr = list(degraded_psnr)
        self.enhanced_psnr = list(enhanced_psnr)
        self.degraded_ssim = list(degraded_ssim) if degraded_ssim is not None else None
        self.enhanced_ssim = list(enhanced_ssim) if enhanced_ssim is not None else None

    def __len__(self) -> int:
        return len(self.frames)

    @staticmethod
    def _fluctuation(values: List) -> float:
        finite = [v for v in values if not is_infinite(v)]
        if not finite:
            return 0.0
        return float(np.std(np.asarray(finite, dtype=np.float64)))

    @property
    def degraded_fluctuation(self) -> float:
        """压缩序列逐帧 PSNR 的标准差"""
        return self._fluctuation(self.degraded_psnr)

    @property
    def enhanced_fluctuation(self) -> float:
        """增强序列逐帧 PSNR 的标准差"""
        return self._fluctuation(self.enhanced_psnr)


class DeltaReport(BaseModel):
    """ΔPSNR / ΔSSIM 结果"""
    delta_psnr: float
    delta_ssim: float
    frames: int
    excluded_frames: int = 0     # 因 PSNR 无穷而被排除的帧数

    @property
    def delta_ssim_e2(self) -> float:
        """以 ×10⁻² 为单位的 ΔSSIM"""
        return self.delta_ssim * 100.0

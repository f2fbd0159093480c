"""
评估图：逐帧 PSNR 波动曲线与率失真曲线。使用 Agg 后端，只写文件不弹窗。
"""
import logging
import os
from typing import Dict, List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from tvqe.entity.errors import DataIOError  # noqa: E402
from tvqe.entity.metrics import QualitySeries, RDPoint, is_infinite  # noqa: E402

logger = logging.getLogger(__name__)

FIG_SIZE = (6.4, 3.6)


def _finite(frames: List[int], values: List) -> tuple:
    kept = [(t, v) for t, v in zip(frames, values) if not is_infinite(v)]
    return [t for t, _ in kept], [v for _, v in kept]


def _save(fig, path: str) -> str:
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        fig.savefig(path, dpi=120, metadata={"Software": None})
    except OSError as e:
        raise DataIOError(f"failed to write figure {path}: {e}") from e
    finally:
        plt.close(fig)
    logger.debug(f"已写出 {path}")
    return path


def plot_fluctuation(series: QualitySeries, path: str, title: str = "") -> str:
    """
    画出压缩与增强序列的逐帧 PSNR

    Args:
        series: 逐帧质量序列
        path: PNG 路径
        title: 图标题

    Returns:
        str: 文件路径
    """
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    ax.plot(*_finite(series.frames, series.degraded_psnr), marker=".", label="compressed")
    ax.plot(*_finite(series.frames, series.enhanced_psnr), marker=".", label="enhanced")
    ax.set_xlabel("frame")
    ax.set_ylabel("PSNR (dB)")
    if title:
        ax.set_title(title)
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    ax.legend(frameon=False)
    fig.tight_layout()
    return _save(fig, path)


def plot_rd_curves(curves: Dict[str, List[RDPoint]], path: str, title: str = "") -> str:
    """
    画率失真曲线，码率轴取对数

    Args:
        curves: 曲线名 -> 点列
        path: PNG 路径
        title: 图标题

    Returns:
        str: 文件路径
    """
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    for label, points in curves.items():
        ordered = sorted(points, key=lambda p: p.rate)
        ax.plot([p.rate for p in ordered], [p.psnr for p in ordered], marker="o", label=label)
    ax.set_xscale("log")
    ax.set_xlabel("rate (kbps)")
    ax.set_ylabel("PSNR (dB)")
    if title:
        ax.set_title(title)
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    ax.legend(frameon=False)
    fig.tight_layout()
    return _save(fig, path)

"""
注意力算子的规模实验：测量 mdta_forward 与 wmsa 随像素数增长的耗时，并拟合 log-log 斜率。
两者在固定通道数/固定窗口下都应接近线性（斜率约 1）。
"""
import logging
import time
from typing import Callable, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from tvqe.autograd.tensor import Tensor
from tvqe.entity.errors import UsageError
from tvqe.entity.model import ModelConfig
from tvqe.model.params import param_init
from tvqe.model.restormer import mdta_forward
from tvqe.model.swin import wmsa

logger = logging.getLogger(__name__)

DEFAULT_SIZES = (16, 32, 64, 128)


class BenchRow(BaseModel):
    """一个分辨率上的测量结果"""
    size: int
    pixels: int
    mdta_seconds: float
    wmsa_seconds: float


class BenchReport(BaseModel):
    rows: List[BenchRow]
    mdta_slope: Optional[float] = None
    wmsa_slope: Optional[float] = None


def _best_time(fn: Callable[[], object], repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def loglog_slope(sizes: Sequence[float], seconds: Sequence[float]) -> float:
    """log(时间) 对 log(规模) 的最小二乘斜率"""
    return float(np.polyfit(np.log(np.asarray(sizes, dtype=np.float64)),
                            np.log(np.asarray(seconds, dtype=np.float64)), 1)[0])


def run_benchmark(
    sizes: Sequence[int] = DEFAULT_SIZES,
    config: Optional[ModelConfig] = None,
    repeats: int = 3,
    seed: int = 0,
) -> BenchReport:
    """
    测量各分辨率下 MDTA 与 W-MSA 的前向耗时

    Args:
        sizes: 特征图边长列表，每个都必须是窗口大小的整数倍
        config: 模型配置（决定通道数、窗口、头数）
        repeats: 每个规模重复次数，取最短时间
        seed: 输入与参数的随机种子

    Returns:
        BenchReport: 每个规模一行；至少两个规模时给出斜率

    Raises:
        UsageError: 边长不是窗口大小的整数倍时抛出
    """
    config = config or ModelConfig(dtype="float32")
    ws = config.window_size
    dim = config.embed_dim
    for s in sizes:
        if s <= 0 or s % ws != 0:
            raise UsageError(f"benchmark size {s} must be a positive multiple of window size {ws}")
    params = param_init(config, seed)
    params.requires_grad_(False)
    rng = np.random.default_rng(seed)
    dtype = config.np_dtype

    rows: List[BenchRow] = []
    for s in sizes:
        feat = Tensor(rng.standard_normal((1, dim, s, s)).astype(dtype))
        tokens = Tensor(rng.standard_normal(((s // ws) ** 2, ws * ws, dim)).astype(dtype))
        mdta_t = _best_time(lambda: mdta_forward(feat, params, "caqe.block0.attn", config.mdta_heads), repeats)
        wmsa_t = _best_time(
            lambda: wmsa(tokens, params, "sstf.enc.stage1.block0.attn", config.heads[0], ws), repeats
        )
        rows.append(BenchRow(size=s, pixels=s * s, mdta_seconds=mdta_t, wmsa_seconds=wmsa_t))
        logger.info(f"{s}x{s}: mdta {mdta_t * 1e3:.3f} ms, wmsa {wmsa_t * 1e3:.3f} ms")

    report = BenchReport(rows=rows)
    if len(rows) >= 2:
        pixels = [r.pixels for r in rows]
        report.mdta_slope = loglog_slope(pixels, [r.mdta_seconds for r in rows])
        report.wmsa_slope = loglog_slope(pixels, [r.wmsa_seconds for r in rows])
        logger.info(f"log-log 斜率: mdta {report.mdta_slope:.3f}, wmsa {report.wmsa_slope:.3f}")
    return report

"""
质量评估：PSNR、SSIM、相对压缩基线的 ΔPSNR/ΔSSIM、逐帧波动序列与 Bjøntegaard BD-rate。

所有函数都是纯函数。
"""
import logging
from collections import OrderedDict
from typing import Dict, List, Literal, Sequence, Tuple

import numpy as np
from scipy.interpolate import PchipInterpolator
from skimage.metrics import structural_similarity

from tvqe.entity.errors import BDRateError, CurveValidationError, DimensionError
from tvqe.entity.metrics import PSNR_INF, DeltaReport, QualitySeries, RDPoint, is_infinite
from tvqe.entity.sequence import sequence_class

logger = logging.getLogger(__name__)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _check_extent(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"plane extents differ: {a.shape} vs {b.shape}")


def psnr(a: np.ndarray, b: np.ndarray, max_value: float = 1.0):
    """
    峰值信噪比

    Args:
        a: 平面
        b: 平面
        max_value: 峰值

    Returns:
        float 或 PSNR_INF: MSE 为 0 时返回无穷标记

    Raises:
        DimensionError: 尺寸不一致时抛出
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_extent(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_INF
    return float(10.0 * np.log10(max_value ** 2 / mse))


def ssim_map(a: np.ndarray, b: np.ndarray, data_range: float = 1.0) -> np.ndarray:
    """
    局部 SSIM 图，只保留不受边界填充影响的区域（每边裁掉 5 像素）

    Raises:
        DimensionError: 尺寸不一致或小于 11×11 时抛出
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_extent(a, b)
    if a.ndim != 2 or min(a.shape) < SSIM_WINDOW:
        raise DimensionError(f"SSIM needs planes of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {a.shape}")
    _, full = structural_similarity(
        a, b,
        data_range=data_range,
        gaussian_weights=True,
        sigma=SSIM_SIGMA,
        use_sample_covariance=False,
        K1=SSIM_K1,
        K2=SSIM_K2,
        full=True,
    )
    pad = (SSIM_WINDOW - 1) // 2
    return full[pad:-pad, pad:-pad]


def ssim(a: np.ndarray, b: np.ndarray, data_range: float = 1.0) -> float:
    """
    结构相似度：11×11 高斯窗（σ=1.5），K1=0.01，K2=0.03

    Args:
        a: 平面
        b: 平面
        data_range: 动态范围

    Returns:
        float: 局部 SSIM 的均值
    """
    return float(np.mean(ssim_map(a, b, data_range)))


def _check_sequences(*seqs: np.ndarray) -> None:
    lengths = {len(s) for s in seqs}
    if len(lengths) != 1:
        raise DimensionError(f"sequences have different frame counts: {[len(s) for s in seqs]}")
    shapes = {tuple(np.shape(s)[1:]) for s in seqs}
    if len(shapes) != 1:
        raise DimensionError(f"sequences have different frame extents: {sorted(shapes)}")


def per_frame_series(
    raw: Sequence[np.ndarray],
    degraded: Sequence[np.ndarray],
    enhanced: Sequence[np.ndarray],
    with_ssim: bool = True,
) -> QualitySeries:
    """
    逐帧质量序列（压缩与增强各一条）

    Args:
        raw: 原始帧
        degraded: 压缩帧
        enhanced: 增强帧
        with_ssim: 是否同时计算 SSIM

    Returns:
        QualitySeries: 长度等于帧数
    """
    _check_sequences(raw, degraded, enhanced)
    d_psnr = [psnr(c, r) for r, c in zip(raw, degraded)]
    e_psnr = [psnr(e, r) for r, e in zip(raw, enhanced)]
    d_ssim = e_ssim = None
    if with_ssim:
        d_ssim = [ssim(c, r) for r, c in zip(raw, degraded)]
        e_ssim = [ssim(e, r) for r, e in zip(raw, enhanced)]
    return QualitySeries(d_psnr, e_psnr, d_ssim, e_ssim)


def delta_from_series(series: QualitySeries) -> DeltaReport:
    """由逐帧序列得到 ΔPSNR/ΔSSIM，PSNR 为无穷的帧不计入均值"""
    diffs = []
    excluded = 0
    for c, e in zip(series.degraded_psnr, series.enhanced_psnr):
        if is_infinite(c) or is_infinite(e):
            excluded += 1
            continue
        diffs.append(e - c)
    delta_psnr = float(np.mean(diffs)) if diffs else 0.0
    delta_ssim = 0.0
    if series.degraded_ssim is not None and len(series):
        delta_ssim = float(np.mean([e - c for c, e in zip(series.degraded_ssim, series.enhanced_ssim)]))
    if excluded:
        logger.warning(f"{excluded} 帧的 PSNR 为无穷，已从 ΔPSNR 均值中排除")
    return DeltaReport(delta_psnr=delta_psnr, delta_ssim=delta_ssim, frames=len(series), excluded_frames=excluded)


def delta_metrics(
    raw: Sequence[np.ndarray],
    compressed: Sequence[np.ndarray],
    enhanced: Sequence[np.ndarray],
) -> DeltaReport:
    """
    相对压缩基线的平均质量提升

    Args:
        raw: 原始帧
        compressed: 压缩帧
        enhanced: 增强帧

    Returns:
        DeltaReport: mean(metric(enhanced, raw) - metric(compressed, raw))

    Raises:
        DimensionError: 帧数或尺寸不一致时抛出
    """
    return delta_from_series(per_frame_series(raw, compressed, enhanced))


def validate_curve(points: Sequence[RDPoint], min_points: int = 3) -> Tuple[np.ndarray, np.ndarray]:
    """
    检查率失真曲线：至少 min_points 个点，码率与 PSNR 都严格递增

    Args:
        points: 曲线上的点（按码率排序后检查）
        min_points: 最少点数

    Returns:
        Tuple[np.ndarray, np.ndarray]: (log10 码率, PSNR)，按码率升序

    Raises:
        CurveValidationError: 点数不足或不单调时抛出
    """
    if len(points) < min_points:
        raise CurveValidationError(f"RD curve needs at least {min_points} points, got {len(points)}")
    ordered = sorted(points, key=lambda p: p.rate)
    rates = np.array([p.rate for p in ordered], dtype=np.float64)
    quality = np.array([p.psnr for p in ordered], dtype=np.float64)
    if not np.all(np.isfinite(quality)):
        raise CurveValidationError("RD curve contains non-finite PSNR values")
    if np.any(np.diff(rates) <= 0):
        raise CurveValidationError(f"RD curve rates are not strictly increasing: {rates.tolist()}")
    if np.any(np.diff(quality) <= 0):
        raise CurveValidationError(f"RD curve PSNR is not strictly increasing with rate: {quality.tolist()}")
    return np.log10(rates), quality


def _integral(log_rate: np.ndarray, quality: np.ndarray, lo: float, hi: float, method: str) -> float:
    if method == "pchip":
        return float(PchipInterpolator(quality, log_rate).integrate(lo, hi))
    degree = min(3, len(quality) - 1)
    poly = np.polyint(np.polyfit(quality, log_rate, degree))
    return float(np.polyval(poly, hi) - np.polyval(poly, lo))


def bd_rate(
    anchor: Sequence[RDPoint],
    test: Sequence[RDPoint],
    method: Literal["pchip", "cubic"] = "pchip",
) -> float:
    """
    Bjøntegaard BD-rate：把 log10(码率) 表示为 PSNR 的函数，在重叠的 PSNR 区间上积分求平均差

    Args:
        anchor: 参考曲线
        test: 被测曲线
        method: "pchip" 分段三次 Hermite 插值（默认）或 "cubic" 全局三次拟合

    Returns:
        float: 百分比，负值表示码率节省

    Raises:
        CurveValidationError: 曲线不合法时抛出
        BDRateError: PSNR 区间无重叠时抛出
    """
    if method not in ("pchip", "cubic"):
        raise BDRateError(f"unknown BD-rate interpolation method '{method}'")
    log_a, q_a = validate_curve(anchor)
    log_t, q_t = validate_curve(test)
    lo = max(q_a.min(), q_t.min())
    hi = min(q_a.max(), q_t.max())
    if not hi > lo:
        raise BDRateError(f"PSNR ranges do not overlap: [{q_a.min()}, {q_a.max()}] vs [{q_t.min()}, {q_t.max()}]")
    int_a = _integral(log_a, q_a, lo, hi, method)
    int_t = _integral(log_t, q_t, lo, hi, method)
    mean_diff = (int_t - int_a) / (hi - lo)
    return float((10.0 ** mean_diff - 1.0) * 100.0)


def class_average_rows(results: Dict[str, DeltaReport]) -> List[Tuple[str, float, float]]:
    """
    按 JCT-VC 类别汇总 ΔPSNR / ΔSSIM(×10⁻²)

    Args:
        results: 序列名 -> DeltaReport

    Returns:
        List[Tuple[str, float, float]]: (类别或 "Average", ΔPSNR, ΔSSIM×10⁻²)，类别按字母序
    """
    groups: "OrderedDict[str, List[DeltaReport]]" = OrderedDict()
    for name in results:
        groups.setdefault(sequence_class(name), []).append(results[name])
    rows = []
    for label in sorted(groups):
        reports = groups[label]
        rows.append((
            label,
            float(np.mean([r.delta_psnr for r in reports])),
            float(np.mean([r.delta_ssim_e2 for r in reports])),
        ))
    if results:
        rows.append((
            "Average",
            float(np.mean([r.delta_psnr for r in results.values()])),
            float(np.mean([r.delta_ssim_e2 for r in results.values()])),
        ))
    return rows

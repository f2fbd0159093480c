import logging
import os
from typing import List, Optional, Tuple

from jinja2 import Environment, FileSystemLoader, StrictUndefined

from tvqe.entity.errors import DataIOError
from tvqe.entity.metrics import DeltaReport, QualitySeries

logger = logging.getLogger(__name__)

TEMPLATE_DIR = os.path.join(os.path.dirname(__file__), "templates")

_env = Environment(
    loader=FileSystemLoader(TEMPLATE_DIR),
    undefined=StrictUndefined,
    keep_trailing_newline=True,
)


def render_eval_report(
    sequence: str,
    width: int,
    height: int,
    delta: DeltaReport,
    series: QualitySeries,
    q: Optional[int] = None,
    bd_rate: Optional[float] = None,
    bd_method: str = "pchip",
    figures: Optional[List[str]] = None,
    class_rows: Optional[List[Tuple[str, float, float]]] = None,
    title: str = "TVQE 评估报告",
) -> str:
    """
    渲染 Markdown 评估报告

    Args:
        sequence: 序列名称
        width: 宽度
        height: 高度
        delta: ΔPSNR/ΔSSIM 结果
        series: 逐帧质量序列
        q: 失真强度
        bd_rate: BD-rate 百分比（没有率失真曲线时为 None）
        bd_method: BD-rate 插值方法
        figures: 报告目录下的图片文件名
        class_rows: 按类别汇总的行

    Returns:
        str: Markdown 文本
    """
    template = _env.get_template("eval_report.md.j2")
    return template.render(
        title=title,
        sequence=sequence,
        width=width,
        height=height,
        frames=len(series),
        q=q,
        delta=delta,
        fluctuation={"degraded": series.degraded_fluctuation, "enhanced": series.enhanced_fluctuation},
        figures=figures or [],
        bd_rate=bd_rate,
        bd_method=bd_method,
        class_rows=class_rows or [],
    )


def write_eval_report(directory: str, text: str, name: str = "report.md") -> str:
    """把渲染好的报告写到 directory/name"""
    path = os.path.join(directory, name)
    try:
        os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
    except OSError as e:
        raise DataIOError(f"failed to write report {path}: {e}") from e
    logger.info(f"评估报告已写出: {path}")
    return path

import argparse
import logging
import os
from typing import Dict, List, Optional

from tvqe.cli.common import add_common_arguments, format_table, load_run_config, open_sequence, output_path, prepare_output
from tvqe.config import Settings
from tvqe.dependencies import get_sequence_store
from tvqe.entity.errors import DimensionError
from tvqe.entity.metrics import RDPoint
from tvqe.report.figures import plot_fluctuation, plot_rd_curves
from tvqe.report.summary import render_eval_report, write_eval_report
from tvqe.repository.report_repo import read_rd_curve
from tvqe.service.metrics import bd_rate, class_average_rows, delta_from_series, per_frame_series

logger = logging.getLogger(__name__)

# 计算 BD-rate 所需的每条曲线最少点数
MIN_RD_POINTS = 3


def add_parser(subparsers) -> None:
    parser = subparsers.add_parser("eval", help="计算 ΔPSNR/ΔSSIM、逐帧质量序列和 BD-rate")
    parser.add_argument("--raw", type=str, default=None, help="原始序列 (io.raw)")
    parser.add_argument("--compressed", type=str, default=None, help="压缩序列 (io.compressed)")
    parser.add_argument("--enhanced", type=str, default=None, help="增强序列 (io.enhanced)")
    parser.add_argument("--rd", type=str, action="append", default=[],
                        help="(rate, psnr) 曲线 CSV，可重复；第一条为参考曲线")
    parser.add_argument("--bd-method", choices=["pchip", "cubic"], default="pchip", help="BD-rate 插值方法")
    parser.add_argument("--sequence", type=str, default=None, help="序列名称（用于按类别汇总，默认取文件名）")
    parser.add_argument("--no-figures", action="store_true", help="不生成 PNG 图")
    add_common_arguments(parser)
    parser.set_defaults(handler=run)


def _bd_section(curves: Dict[str, List[RDPoint]], method: str) -> Optional[List[tuple]]:
    if len(curves) < 2:
        return None
    short = [name for name, pts in curves.items() if len(pts) < MIN_RD_POINTS]
    if short:
        logger.warning(f"以下曲线不足 {MIN_RD_POINTS} 个点，跳过 BD-rate: {', '.join(short)}")
        return None
    names = list(curves)
    anchor = curves[names[0]]
    return [(names[0], name, bd_rate(anchor, curves[name], method)) for name in names[1:]]


def run(args: argparse.Namespace, settings: Settings) -> int:
    config = load_run_config(args, settings, {
        "io.raw": args.raw, "io.compressed": args.compressed, "io.enhanced": args.enhanced,
    })
    reports = prepare_output(config)
    store = get_sequence_store()
    sequences = [open_sequence(store, config.require_path(name), config) for name in ("raw", "compressed", "enhanced")]
    counts = [s.frame_count for s in sequences]
    if len(set(counts)) != 1:
        raise DimensionError(f"sequences are not aligned: frame counts {counts}")
    raw, compressed, enhanced = (store.read_y_planes(s) for s in sequences)

    series = per_frame_series(raw, compressed, enhanced)
    delta = delta_from_series(series)
    name = args.sequence or os.path.splitext(os.path.basename(config.io.raw))[0]
    reports.write_series(series)
    reports.write_csv(
        "delta.csv",
        ["sequence", "q", "delta_psnr", "delta_ssim", "delta_ssim_e2", "frames", "excluded_frames"],
        [(name, config.degrade.q, delta.delta_psnr, delta.delta_ssim, delta.delta_ssim_e2,
          delta.frames, delta.excluded_frames)],
    )
    class_rows = class_average_rows({name: delta})
    reports.write_csv("classes.csv", ["class", "delta_psnr", "delta_ssim_e2"], class_rows)

    figures = []
    if not args.no_figures:
        plot_fluctuation(series, output_path(config, "fluctuation.png"), title=name)
        figures.append("fluctuation.png")

    curves = {os.path.splitext(os.path.basename(p))[0]: read_rd_curve(p) for p in args.rd}
    bd_rows = _bd_section(curves, args.bd_method)
    if curves:
        reports.write_rd_curves(curves)
        if not args.no_figures:
            plot_rd_curves(curves, output_path(config, "rd.png"), title=name)
            figures.append("rd.png")
    if bd_rows is not None:
        reports.write_csv("bd_rate.csv", ["anchor", "test", "bd_rate"], bd_rows)

    text = render_eval_report(
        name, config.io.width, config.io.height, delta, series, q=config.degrade.q,
        bd_rate=bd_rows[0][2] if bd_rows else None, bd_method=args.bd_method,
        figures=figures, class_rows=class_rows,
    )
    write_eval_report(config.io.output_dir, text)

    print(format_table(["sequence", "delta_psnr_db", "delta_ssim_e2", "frames", "excluded"],
                       [(name, delta.delta_psnr, delta.delta_ssim_e2, delta.frames, delta.excluded_frames)]))
    if bd_rows:
        print()
        print(format_table(["anchor", "test", "bd_rate_pct"], bd_rows))
    return 0

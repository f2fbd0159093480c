import argparse
import logging
import os

import numpy as np

from tvqe.cli.common import add_common_arguments, format_table, load_run_config, open_sequence, output_path, prepare_output
from tvqe.config import Settings
from tvqe.dependencies import get_sequence_store
from tvqe.entity.errors import UsageError
from tvqe.entity.metrics import PSNR_INF, is_infinite
from tvqe.service.degrade import degrade_sequence, make_test_sequence
from tvqe.service.metrics import per_frame_series

logger = logging.getLogger(__name__)


def add_parser(subparsers) -> None:
    parser = subparsers.add_parser("synth", help="对原始序列做合成编码失真，每个 q 输出一个序列")
    parser.add_argument("--input", type=str, default=None, help="原始 .yuv 序列 (io.raw)")
    parser.add_argument("--q", type=int, nargs="+", default=None, help="失真强度列表 (默认: 22 27 32 37 42)")
    parser.add_argument("--make-raw", type=int, default=None, metavar="FRAMES",
                        help="先用测试图案生成 FRAMES 帧的原始序列写到 --input")
    add_common_arguments(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, settings: Settings) -> int:
    config = load_run_config(args, settings, {"io.raw": args.input, "q_list": args.q})
    raw_path = config.require_path("raw")
    width, height = config.require_dims()
    store = get_sequence_store()
    reports = prepare_output(config)

    if args.make_raw is not None:
        if args.make_raw <= 0:
            raise UsageError(f"--make-raw needs a positive frame count, got {args.make_raw}")
        frames = make_test_sequence(args.make_raw, height, width, seed=config.seed)
        store.write_sequence(raw_path, width, height, frames)
        logger.info(f"已生成测试序列 {raw_path}: {args.make_raw} 帧 {width}x{height}")

    raw = open_sequence(store, raw_path, config)
    raw_planes = store.read_y_planes(raw)
    stem = os.path.splitext(os.path.basename(raw_path))[0]

    rows = []
    for q in config.q_list:
        profile = config.degrade.model_copy(update={"q": q})
        out = output_path(config, f"{stem}_q{q}.yuv")
        seq, rate = degrade_sequence(store, raw, out, profile)
        series = per_frame_series(raw_planes, store.read_y_planes(seq), store.read_y_planes(seq), with_ssim=False)
        finite = [v for v in series.degraded_psnr if not is_infinite(v)]
        quality = float(np.mean(finite)) if finite else PSNR_INF
        rows.append((q, rate, quality, out))

    reports.write_csv("rd.csv", ["q", "rate", "psnr", "path"], rows)
    print(format_table(["q", "rate_kbps", "psnr_db", "path"], rows))
    return 0

import argparse
import logging

from tvqe.cli.common import add_common_arguments, load_run_config, open_sequence, output_path, prepare_output
from tvqe.config import Settings
from tvqe.dependencies import get_checkpoint_repo, get_sequence_store
from tvqe.service.enhancer import QualityEnhancer

logger = logging.getLogger(__name__)


def add_parser(subparsers) -> None:
    parser = subparsers.add_parser("enhance", help="用检查点逐帧增强压缩序列")
    parser.add_argument("--checkpoint", type=str, default=None, help="检查点 (io.checkpoint)")
    parser.add_argument("--input", type=str, default=None, help="压缩序列 (io.compressed)")
    parser.add_argument("--output", type=str, default=None, help="输出序列 (默认: <out-dir>/enhanced.yuv)")
    parser.add_argument("--workers", type=int, default=None, help="推理线程数")
    parser.add_argument("--preview-dir", type=str, default=None, help="导出增强帧 PNG 预览的目录")
    add_common_arguments(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, settings: Settings) -> int:
    config = load_run_config(args, settings, {
        "io.checkpoint": args.checkpoint, "io.compressed": args.input, "io.enhanced": args.output,
    })
    prepare_output(config)
    # 显式给出模型配置时要求与检查点一致
    expected = config.model if "model" in config.model_fields_set else None
    ckpt = get_checkpoint_repo().load(config.require_path("checkpoint"), expected)

    store = get_sequence_store()
    seq = open_sequence(store, config.require_path("compressed"), config)
    out_path = config.io.enhanced or output_path(config, "enhanced.yuv")
    workers = args.workers if args.workers is not None else settings.ENHANCE_WORKERS

    enhancer = QualityEnhancer(ckpt.config, ckpt.params, workers)
    out = enhancer.enhance_sequence(store, seq, out_path, args.preview_dir)
    print(f"enhanced {out.frame_count} frames {out.width}x{out.height} -> {out_path}")
    return 0

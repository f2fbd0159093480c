import argparse
import logging

from tvqe.cli.common import add_common_arguments, load_run_config, open_sequence, output_path, prepare_output
from tvqe.config import Settings
from tvqe.dependencies import get_checkpoint_repo, get_sequence_store
from tvqe.service.dataset import sample_patches
from tvqe.service.trainer import TwoStageTrainer

logger = logging.getLogger(__name__)


def add_parser(subparsers) -> None:
    parser = subparsers.add_parser("train", help="两阶段训练，输出检查点和损失曲线")
    parser.add_argument("--raw", type=str, default=None, help="原始序列 (io.raw)")
    parser.add_argument("--compressed", type=str, default=None, help="压缩序列 (io.compressed)")
    parser.add_argument("--checkpoint", type=str, default=None, help="输出检查点 (默认: <out-dir>/model.tvqe)")
    add_common_arguments(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, settings: Settings) -> int:
    config = load_run_config(args, settings, {
        "io.raw": args.raw, "io.compressed": args.compressed, "io.checkpoint": args.checkpoint,
    })
    schedule = config.train_schedule()
    reports = prepare_output(config)
    checkpoint_path = config.io.checkpoint or output_path(config, "model.tvqe")

    pairs = []
    if schedule.total_steps > 0:
        store = get_sequence_store()
        raw = open_sequence(store, config.require_path("raw"), config)
        compressed = open_sequence(store, config.require_path("compressed"), config)
        pairs = sample_patches(
            store, compressed, raw, schedule.crop, schedule.num_patches, config.model.radius, schedule.seed,
        )

    repo = get_checkpoint_repo()
    trainer = TwoStageTrainer(config.model, schedule, repo, output_path(config, "checkpoints"))
    result = trainer.train(pairs)

    digest = repo.save(checkpoint_path, result.checkpoint)
    reports.write_loss_history(result.history)
    logger.info(f"训练完成: {len(result.history)} 步, 检查点 {checkpoint_path}")
    print(f"checkpoint {checkpoint_path} blake2b {digest.hex()}")
    return 0

import argparse
import os
from typing import Any, Dict, List, Optional, Sequence

from tvqe.cli.runconfig import RunConfig, parse_dims, resolve_config
from tvqe.config import Settings
from tvqe.dependencies import get_report_repo
from tvqe.entity.errors import DataIOError
from tvqe.entity.sequence import YuvSequence
from tvqe.repository.report_repo import ReportRepo, format_value
from tvqe.storage.base import SequenceStore


def add_common_arguments(parser: argparse.ArgumentParser, dims: bool = True) -> None:
    """每个子命令共有的参数：--config、--seed、--out-dir、key=value 覆盖项"""
    parser.add_argument("--config", type=str, default=None, help="JSON 配置文件（可以是回显的 resolved_config.json）")
    parser.add_argument("--seed", type=int, default=None, help="随机种子 (默认: 0)")
    parser.add_argument("--out-dir", type=str, default=None, help="输出目录")
    if dims:
        parser.add_argument("--dims", type=str, default=None, help="YUV 尺寸 WxH，例如 416x240")
    parser.add_argument("overrides", nargs="*", default=[], help="配置覆盖项，例如 schedule.stage1_steps=0")


def load_run_config(args: argparse.Namespace, settings: Settings, extra: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    由命令行参数解析 RunConfig

    Args:
        args: 解析后的命令行参数
        settings: 进程级配置
        extra: 子命令专用参数（点分键 -> 值）

    Returns:
        RunConfig: 校验后的配置
    """
    flags: Dict[str, Any] = {"seed": args.seed, "io.output_dir": args.out_dir}
    dims = getattr(args, "dims", None)
    if dims:
        width, height = parse_dims(dims)
        flags["io.width"] = width
        flags["io.height"] = height
    flags.update(extra or {})
    return resolve_config(args.config, args.overrides, settings, flags)


def prepare_output(config: RunConfig) -> ReportRepo:
    """创建输出目录并回显解析后的配置"""
    repo = get_report_repo(config.io.output_dir)
    repo.echo_config(config)
    return repo


def open_sequence(store: SequenceStore, path: str, config: RunConfig) -> YuvSequence:
    """
    按 --dims 打开一个 YUV 序列

    Raises:
        UsageError: 没有给出尺寸时抛出
        DataIOError: 序列不存在或大小与尺寸不符时抛出
    """
    width, height = config.require_dims()
    if not store.exists(path):
        raise DataIOError(f"sequence not found: {path}")
    return store.open(path, width, height)


def output_path(config: RunConfig, name: str) -> str:
    return os.path.join(config.io.output_dir, name)


def _cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.4f}"
    return format_value(value)


def format_table(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    """空白对齐的表格文本，用于标准输出"""
    cells: List[List[str]] = [list(header)] + [[_cell(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    return "\n".join("  ".join(c.ljust(widths[i]) for i, c in enumerate(r)).rstrip() for r in cells)

import argparse
import logging
import sys
from typing import Optional, Sequence

from pydantic import ValidationError

from tvqe.cli import bench, enhance, evaluate, gradcheck, synth, train
from tvqe.config import Settings, get_settings
from tvqe.entity.errors import TVQEError, UsageError

logger = logging.getLogger(__name__)

COMMANDS = (synth, train, enhance, evaluate, gradcheck, bench)


class CommandParser(argparse.ArgumentParser):
    """参数错误抛出 UsageError（退出码 1），而不是直接退出进程"""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    """构建命令行解析器"""
    parser = CommandParser(prog="tvqe", description="TVQE 压缩视频质量增强工具")
    parser.add_argument("--log-level", choices=["debug", "info", "warning", "error"], default=None,
                        help="日志级别 (默认取 TVQE_LOG_LEVEL)")
    parser.add_argument("--no-log", action="store_true", help="只输出警告及以上的日志")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.add_parser(subparsers)
    return parser


def report_failure(error: Exception) -> int:
    """打印诊断信息并返回退出码"""
    if isinstance(error, TVQEError):
        code = error.exit_code
    else:
        code = 1
    logger.error(f"{type(error).__name__}: {error}")
    print(f"error: {error}", file=sys.stderr)
    return code


def run_command(args: argparse.Namespace, settings: Settings) -> int:
    """
    执行已解析的子命令，把项目异常映射为退出码

    Returns:
        int: 0 成功，1 用法/配置错误，2 I/O 错误，3 数值失败
    """
    try:
        return args.handler(args, settings)
    except (TVQEError, ValidationError) as e:
        return report_failure(e)


def main(argv: Optional[Sequence[str]] = None, settings: Optional[Settings] = None) -> int:
    """解析参数并执行，不配置日志（由 run.py 负责）"""
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        return report_failure(e)
    return run_command(args, settings or get_settings())

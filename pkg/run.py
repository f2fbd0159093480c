#!/usr/bin/env python
"""
TVQE 启动脚本
用法: python run.py [--log-level LEVEL] [--no-log] {synth,train,enhance,eval,gradcheck,bench} ...
"""

import logging
import os
import sys

from tvqe.cli import build_parser, report_failure, run_command
from tvqe.config import get_settings
from tvqe.entity.errors import UsageError

logger = logging.getLogger("tvqe")


def configure_logging(level: str, quiet: bool) -> None:
    """配置日志"""
    logging.basicConfig(
        level=logging.WARNING if quiet else getattr(logging, level.upper()),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[
            logging.StreamHandler(sys.stdout)
        ]
    )


def main() -> int:
    """主函数"""
    settings = get_settings()
    try:
        args = build_parser().parse_args()
    except UsageError as e:
        configure_logging(settings.LOG_LEVEL, quiet=False)
        return report_failure(e)

    configure_logging(args.log_level or settings.LOG_LEVEL, args.no_log)

    # 检查环境变量
    if not os.path.exists(".env"):
        logger.debug("没有找到 .env 文件，将使用默认配置")

    logger.info(f"{settings.APP_NAME} {settings.VERSION}: {args.command}")
    return run_command(args, settings)


if __name__ == "__main__":
    sys.exit(main())

import argparse
import contextlib
import logging

from tvqe.autograd.tensor import inject_backward_fault
from tvqe.cli.common import add_common_arguments, format_table, load_run_config, prepare_output
from tvqe.config import Settings
from tvqe.entity.model import ModelConfig
from tvqe.service.gradcheck import assert_passed, run_gradcheck

logger = logging.getLogger(__name__)


def add_parser(subparsers) -> None:
    parser = subparsers.add_parser("gradcheck", help="算子与完整网络的有限差分梯度检查")
    parser.add_argument("--extent", type=int, default=16, help="完整网络检查的帧边长 (默认: 16)")
    parser.add_argument("--tol", type=float, default=None, help="完整网络检查的相对误差容差")
    parser.add_argument("--ops-only", action="store_true", help="只检查算子")
    parser.add_argument("--inject-fault", type=str, default=None, metavar="OP",
                        help=argparse.SUPPRESS)
    add_common_arguments(parser, dims=False)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, settings: Settings) -> int:
    config = load_run_config(args, settings)
    reports_repo = prepare_output(config)
    # 没有显式给出模型配置时使用 toy 规模
    model = config.model if "model" in config.model_fields_set else ModelConfig.toy()
    tol = args.tol if args.tol is not None else settings.GRADCHECK_TOLERANCE

    fault = inject_backward_fault(args.inject_fault) if args.inject_fault else contextlib.nullcontext()
    with fault:
        reports = run_gradcheck(model, extent=args.extent, seed=config.seed, tol=tol,
                                include_model=not args.ops_only)

    header = ["name", "max_rel_error", "mean_rel_error", "max_abs_error", "coords", "tolerance", "passed"]
    rows = [[getattr(r, c) for c in header] for r in reports]
    reports_repo.write_csv("gradcheck.csv", header, rows)
    print(format_table(["name", "max_rel_error", "coords", "passed"],
                       [(r.name, f"{r.max_rel_error:.3e}", r.coords, "ok" if r.passed else "FAIL") for r in reports]))
    assert_passed(reports)
    return 0

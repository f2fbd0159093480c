import argparse

from tvqe.cli.common import add_common_arguments, format_table, load_run_config, prepare_output
from tvqe.config import Settings
from tvqe.service.benchmark import DEFAULT_SIZES, run_benchmark


def add_parser(subparsers) -> None:
    parser = subparsers.add_parser("bench", help="测量 MDTA 与 W-MSA 随分辨率的耗时并拟合 log-log 斜率")
    parser.add_argument("--sizes", type=int, nargs="+", default=list(DEFAULT_SIZES), help="特征图边长列表")
    parser.add_argument("--repeats", type=int, default=3, help="每个规模的重复次数，取最短时间")
    add_common_arguments(parser, dims=False)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, settings: Settings) -> int:
    config = load_run_config(args, settings)
    reports = prepare_output(config)
    report = run_benchmark(args.sizes, config.model, repeats=args.repeats, seed=config.seed)

    header = ["size", "pixels", "mdta_seconds", "wmsa_seconds"]
    rows = [[getattr(r, c) for c in header] for r in report.rows]
    reports.write_csv("bench.csv", header, rows)
    print(format_table(["size", "pixels", "mdta_ms", "wmsa_ms"],
                       [(r.size, r.pixels, r.mdta_seconds * 1e3, r.wmsa_seconds * 1e3) for r in report.rows]))
    if report.mdta_slope is not None:
        print(f"log-log slope: mdta {report.mdta_slope:.3f}, wmsa {report.wmsa_slope:.3f}")
    return 0

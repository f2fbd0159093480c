import csv
import json
import logging
import os
from typing import Dict, Iterable, List, Sequence

from pydantic import BaseModel, ValidationError

from tvqe.entity.errors import DataIOError
from tvqe.entity.metrics import QualitySeries, RDPoint, is_infinite
from tvqe.entity.training import LossRecord

logger = logging.getLogger(__name__)

RESOLVED_CONFIG = "resolved_config.json"

LOSS_COLUMNS = ["step", "stage", "alpha", "beta", "charbonnier", "mse", "total"]


def format_value(value) -> str:
    """数值格式化：浮点用 repr 保证逐位可复现，PSNR 无穷标记写为 inf"""
    if is_infinite(value):
        return "inf"
    if isinstance(value, float):
        return repr(value)
    return str(value)


class ReportRepo:
    """
    报告存储库：CSV 表、gnuplot 表和配置回显，全部写在 base_dir 下。
    """

    def __init__(self, base_dir: str):
        self.base_dir = base_dir

    def path(self, name: str) -> str:
        return os.path.join(self.base_dir, name)

    def _ensure_dir(self) -> None:
        try:
            os.makedirs(self.base_dir, exist_ok=True)
        except OSError as e:
            raise DataIOError(f"cannot create output directory {self.base_dir}: {e}") from e

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> str:
        """
        写 CSV 文件（必有表头行）

        Args:
            name: 文件名
            header: 列名
            rows: 数据行

        Returns:
            str: 文件路径
        """
        self._ensure_dir()
        path = self.path(name)
        try:
            with open(path, "w", newline="") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(header)
                for row in rows:
                    writer.writerow([format_value(v) for v in row])
        except OSError as e:
            raise DataIOError(f"failed to write {path}: {e}") from e
        logger.debug(f"已写出 {path}")
        return path

    def write_gnuplot(self, name: str, columns: Dict[str, List]) -> str:
        """
        写 gnuplot 兼容的空白对齐表，首行是以 # 开头的列名

        Args:
            name: 文件名
            columns: 列名 -> 数值列表（等长）

        Returns:
            str: 文件路径
        """
        self._ensure_dir()
        names = list(columns)
        lengths = {len(v) for v in columns.values()}
        if len(lengths) > 1:
            raise DataIOError(f"gnuplot columns have different lengths: {sorted(lengths)}")
        cells = [[format_value(v) for v in columns[n]] for n in names]
        widths = [max([len(n) + (2 if i == 0 else 0)] + [len(c) for c in cells[i]]) for i, n in enumerate(names)]
        path = self.path(name)
        lines = ["  ".join(("# " + n if i == 0 else n).ljust(widths[i]) for i, n in enumerate(names)).rstrip()]
        for r in range(lengths.pop() if lengths else 0):
            lines.append("  ".join(cells[i][r].ljust(widths[i]) for i in range(len(names))).rstrip())
        try:
            with open(path, "w") as f:
                f.write("\n".join(lines) + "\n")
        except OSError as e:
            raise DataIOError(f"failed to write {path}: {e}") from e
        return path

    def write_loss_history(self, records: Sequence[LossRecord], name: str = "loss.csv") -> str:
        """损失历史：step, stage, alpha, beta, charbonnier, mse, total"""
        rows = ([getattr(r, c) for c in LOSS_COLUMNS] for r in records)
        return self.write_csv(name, LOSS_COLUMNS, rows)

    def write_series(self, series: QualitySeries, name: str = "series.csv") -> str:
        """逐帧质量序列，同时写一份 gnuplot 表"""
        header = ["frame", "degraded_psnr", "enhanced_psnr"]
        columns = [series.frames, series.degraded_psnr, series.enhanced_psnr]
        if series.degraded_ssim is not None and series.enhanced_ssim is not None:
            header += ["degraded_ssim", "enhanced_ssim"]
            columns += [series.degraded_ssim, series.enhanced_ssim]
        path = self.write_csv(name, header, zip(*columns))
        self.write_gnuplot(os.path.splitext(name)[0] + ".dat", dict(zip(header, columns)))
        return path

    def write_rd_curves(self, curves: Dict[str, List[RDPoint]], name: str = "rd.dat") -> str:
        """率失真曲线的 gnuplot 表，每条曲线两列"""
        longest = max((len(c) for c in curves.values()), default=0)
        columns: Dict[str, List] = {}
        for label, points in curves.items():
            pad = longest - len(points)
            columns[f"{label}_rate"] = [p.rate for p in points] + ["nan"] * pad
            columns[f"{label}_psnr"] = [p.psnr for p in points] + ["nan"] * pad
        return self.write_gnuplot(name, columns)

    def echo_config(self, config: BaseModel) -> str:
        """把完整解析后的配置写入 resolved_config.json"""
        self._ensure_dir()
        path = self.path(RESOLVED_CONFIG)
        try:
            with open(path, "w") as f:
                f.write(json.dumps(config.model_dump(mode="json"), indent=2, sort_keys=True) + "\n")
        except OSError as e:
            raise DataIOError(f"failed to write {path}: {e}") from e
        return path


def read_rd_curve(path: str) -> List[RDPoint]:
    """
    读取 (rate, psnr) 曲线 CSV，表头必须包含 rate 与 psnr 两列

    Raises:
        DataIOError: 文件无法读取或格式错误时抛出
    """
    try:
        with open(path, newline="") as f:
            reader = csv.DictReader(f)
            if reader.fieldnames is None or not {"rate", "psnr"} <= set(reader.fieldnames):
                raise DataIOError(f"{path}: RD curve needs a header with 'rate' and 'psnr' columns")
            return [RDPoint(rate=float(row["rate"]), psnr=float(row["psnr"])) for row in reader]
    except OSError as e:
        raise DataIOError(f"failed to read RD curve {path}: {e}") from e
    except (ValueError, ValidationError) as e:
        raise DataIOError(f"{path}: malformed RD curve: {e}") from e

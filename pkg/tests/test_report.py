"""
评估报告与图的测试
"""
import pytest

from tvqe.entity.errors import DataIOError
from tvqe.entity.metrics import PSNR_INF, DeltaReport, QualitySeries, RDPoint
from tvqe.report import plot_fluctuation, plot_rd_curves, render_eval_report, write_eval_report

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


@pytest.fixture
def series():
    return QualitySeries([PSNR_INF, 30.0, 31.0, 29.5], [PSNR_INF, 31.0, 31.5, 30.5])


@pytest.fixture
def delta():
    return DeltaReport(delta_psnr=0.8333, delta_ssim=0.0125, frames=4, excluded_frames=1)


class TestSummary:

    def test_render_minimal(self, delta, series):
        text = render_eval_report("BasketballPass", 416, 240, delta, series)
        assert text.startswith("# TVQE 评估报告")
        assert "`BasketballPass` (416x240, 4 帧)" in text
        assert "| ΔPSNR (dB) | 0.8333 |" in text
        assert "| ΔSSIM (×10⁻²) | 1.2500 |" in text
        assert "| PSNR 为无穷而排除的帧 | 1 |" in text
        assert "失真强度" not in text
        assert "BD-rate" not in text
        assert "按类别汇总" not in text

    def test_render_full(self, delta, series):
        text = render_eval_report(
            "BasketballPass", 416, 240, delta, series, q=37, bd_rate=-12.5, bd_method="cubic",
            figures=["fluctuation.png"], class_rows=[("D", 0.8333, 1.25), ("Average", 0.8333, 1.25)],
        )
        assert "- 失真强度 q: 37" in text
        assert "![fluctuation.png](fluctuation.png)" in text
        assert "- 插值方法: cubic" in text
        assert "-12.5000 %" in text
        assert "| Average | 0.8333 | 1.2500 |" in text

    def test_write(self, tmp_path):
        path = write_eval_report(str(tmp_path / "out"), "# x\n")
        assert (tmp_path / "out" / "report.md").read_text(encoding="utf-8") == "# x\n"
        assert path.endswith("report.md")

    def test_write_failure(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        with pytest.raises(DataIOError):
            write_eval_report(str(blocker), "# x\n")


class TestFigures:

    def test_fluctuation_skips_infinite(self, series, tmp_path):
        path = plot_fluctuation(series, str(tmp_path / "f.png"), title="seq")
        with open(path, "rb") as f:
            assert f.read(8) == PNG_SIGNATURE

    def test_rd_curves(self, tmp_path):
        curves = {
            "anchor": [RDPoint(rate=r, psnr=q) for r, q in [(400, 36.0), (100, 30.0), (200, 33.0)]],
            "test": [RDPoint(rate=r, psnr=q) for r, q in [(90, 30.0), (180, 33.0)]],
        }
        path = plot_rd_curves(curves, str(tmp_path / "sub" / "rd.png"))
        with open(path, "rb") as f:
            assert f.read(8) == PNG_SIGNATURE

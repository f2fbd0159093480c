"""
质量指标与 BD-rate 的测试
"""
import numpy as np
import pytest
from scipy.integrate import quad
from skimage.metrics import structural_similarity

from tvqe.entity.errors import BDRateError, CurveValidationError, DimensionError
from tvqe.entity.metrics import PSNR_INF, DeltaReport, QualitySeries, RDPoint, is_infinite
from tvqe.service.metrics import (
    bd_rate, class_average_rows, delta_from_series, delta_metrics, per_frame_series, psnr,
    ssim, ssim_map, validate_curve,
)


def curve(pairs):
    return [RDPoint(rate=r, psnr=q) for r, q in pairs]


@pytest.fixture
def anchor():
    return curve([(100.0, 30.0), (180.0, 32.5), (320.0, 35.0), (560.0, 37.0), (1000.0, 39.0)])


class TestPSNR:

    def test_one_level_offset(self):
        a = np.zeros((8, 8))
        b = np.full((8, 8), 1.0 / 255.0)
        assert psnr(a, b) == pytest.approx(48.1308, abs=1e-4)

    def test_max_value(self):
        assert psnr(np.zeros(4), np.full(4, 1.0), max_value=255.0) == pytest.approx(48.1308, abs=1e-4)

    def test_identical_is_infinite(self):
        a = np.ones((4, 4))
        assert psnr(a, a) is PSNR_INF
        assert is_infinite(psnr(a, a))
        assert str(PSNR_INF) == "inf"

    def test_extent_mismatch(self):
        with pytest.raises(DimensionError):
            psnr(np.zeros((4, 4)), np.zeros((4, 5)))


class TestSSIM:

    def test_constant_planes_use_k1(self):
        a = np.full((16, 16), 0.2)
        b = np.full((16, 16), 0.6)
        c1 = (0.01 * 1.0) ** 2
        expected = (2 * 0.2 * 0.6 + c1) / (0.2 ** 2 + 0.6 ** 2 + c1)
        assert ssim(a, b) == pytest.approx(expected, rel=1e-9)

    def test_matches_library_mean(self, rng):
        a = rng.uniform(0, 1, (24, 28))
        b = np.clip(a + rng.normal(0, 0.1, a.shape), 0, 1)
        expected = structural_similarity(
            a, b, data_range=1.0, gaussian_weights=True, sigma=1.5, use_sample_covariance=False,
            K1=0.01, K2=0.03,
        )
        assert ssim(a, b) == pytest.approx(expected, abs=1e-12)

    def test_identical_is_one(self, rng):
        a = rng.uniform(0, 1, (24, 24))
        assert ssim(a, a) == pytest.approx(1.0, abs=1e-12)

    def test_symmetric_and_bounded(self, rng):
        a = rng.uniform(0, 1, (24, 24))
        b = np.clip(a + rng.normal(0, 0.1, a.shape), 0, 1)
        assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)
        assert 0.0 < ssim(a, b) < 1.0

    def test_more_noise_lower_ssim(self, rng):
        a = rng.uniform(0, 1, (32, 32))
        noise = rng.normal(0, 1, a.shape)
        assert ssim(a, a + 0.02 * noise) > ssim(a, a + 0.2 * noise)

    def test_map_is_valid_region(self, rng):
        a = rng.uniform(0, 1, (16, 20))
        assert ssim_map(a, a).shape == (6, 10)

    def test_too_small(self):
        with pytest.raises(DimensionError):
            ssim(np.zeros((10, 20)), np.zeros((10, 20)))


class TestDelta:

    def test_zero_when_enhanced_equals_compressed(self, rng):
        raw = rng.uniform(0, 1, (3, 16, 16))
        compressed = np.clip(raw + rng.normal(0, 0.05, raw.shape), 0, 1)
        report = delta_metrics(raw, compressed, compressed)
        assert report.delta_psnr == 0.0
        assert report.delta_ssim == 0.0
        assert report.frames == 3
        assert report.excluded_frames == 0

    def test_improvement_is_positive(self, rng):
        raw = rng.uniform(0, 1, (2, 16, 16))
        noise = rng.normal(0, 1, raw.shape)
        report = delta_metrics(raw, raw + 0.1 * noise, raw + 0.05 * noise)
        assert report.delta_psnr == pytest.approx(20 * np.log10(2.0), rel=1e-9)
        assert report.delta_ssim > 0.0
        assert report.delta_ssim_e2 == pytest.approx(100 * report.delta_ssim)

    def test_infinite_frames_excluded(self):
        series = QualitySeries([PSNR_INF, 30.0, 31.0], [PSNR_INF, 32.0, 32.0])
        report = delta_from_series(series)
        assert report.excluded_frames == 1
        assert report.delta_psnr == pytest.approx(1.5)

    def test_frame_count_mismatch(self, rng):
        raw = rng.uniform(0, 1, (3, 16, 16))
        with pytest.raises(DimensionError):
            per_frame_series(raw, raw[:2], raw[:2])

    def test_fluctuation(self):
        series = QualitySeries([30.0, 32.0, PSNR_INF], [31.0, 31.0, 31.0])
        assert series.degraded_fluctuation == pytest.approx(1.0)
        assert series.enhanced_fluctuation == 0.0

    def test_series_without_ssim(self, rng):
        raw = rng.uniform(0, 1, (2, 8, 8))
        series = per_frame_series(raw, raw * 0.9, raw * 0.95, with_ssim=False)
        assert series.degraded_ssim is None
        assert len(series) == 2


class TestCurveValidation:

    def test_sorted_by_rate(self, anchor):
        log_rate, quality = validate_curve(list(reversed(anchor)))
        assert np.all(np.diff(log_rate) > 0)
        assert quality[0] == 30.0

    def test_too_few_points(self):
        with pytest.raises(CurveValidationError):
            validate_curve(curve([(1.0, 30.0), (2.0, 31.0)]))

    def test_non_monotone(self):
        with pytest.raises(CurveValidationError):
            validate_curve(curve([(1.0, 30.0), (2.0, 32.0), (3.0, 31.0)]))
        with pytest.raises(CurveValidationError):
            validate_curve(curve([(1.0, 30.0), (1.0, 31.0), (3.0, 32.0)]))

    def test_rate_must_be_positive(self):
        with pytest.raises(ValueError):
            RDPoint(rate=0.0, psnr=30.0)


class TestBDRate:

    @pytest.mark.parametrize("method", ["pchip", "cubic"])
    def test_identical_curves(self, anchor, method):
        assert bd_rate(anchor, anchor, method) == pytest.approx(0.0, abs=1e-9)

    @pytest.mark.parametrize("method", ["pchip", "cubic"])
    def test_uniform_rate_scaling(self, anchor, method):
        test = [RDPoint(rate=0.9 * p.rate, psnr=p.psnr) for p in anchor]
        assert bd_rate(anchor, test, method) == pytest.approx(-10.0, abs=1e-6)

    @pytest.mark.parametrize("method", ["pchip", "cubic"])
    def test_antisymmetric(self, anchor, method):
        test = curve([(90.0, 30.5), (150.0, 32.8), (300.0, 35.5), (500.0, 37.2), (800.0, 38.6)])
        forward = bd_rate(anchor, test, method) / 100.0
        backward = bd_rate(test, anchor, method) / 100.0
        assert (1.0 + forward) * (1.0 + backward) == pytest.approx(1.0, abs=1e-9)

    def test_linear_curves_closed_form(self):
        qs = [30.0, 32.5, 35.0, 37.5, 40.0]
        anchor = curve([(10 ** (0.1 * q), q) for q in qs])
        test = curve([(10 ** (0.1 * q - 0.05 + 0.002 * (q - 35.0)), q) for q in qs])
        expected = (10 ** -0.05 - 1.0) * 100.0
        for method in ("pchip", "cubic"):
            assert bd_rate(anchor, test, method) == pytest.approx(expected, abs=1e-6)

    def test_cubic_matches_quadrature(self):
        # log10 码率是 PSNR 的三次多项式时，全局三次拟合是精确的
        def log_anchor(q):
            return 2.0 + 0.08 * (q - 30) + 0.002 * (q - 30) ** 2 - 0.0001 * (q - 30) ** 3

        def log_test(q):
            return log_anchor(q) - 0.03 - 0.004 * (q - 30)

        qs = [30.0, 33.0, 36.0, 40.0]
        anchor = curve([(10 ** log_anchor(q), q) for q in qs])
        test = curve([(10 ** log_test(q), q) for q in qs])
        diff, _ = quad(lambda q: log_test(q) - log_anchor(q), 30.0, 40.0)
        expected = (10 ** (diff / 10.0) - 1.0) * 100.0
        assert bd_rate(anchor, test, "cubic") == pytest.approx(expected, abs=0.05)
        assert bd_rate(anchor, test, "pchip") == pytest.approx(expected, abs=0.5)

    def test_partial_overlap_uses_common_range(self, anchor):
        shifted = [RDPoint(rate=p.rate, psnr=p.psnr + 2.0) for p in anchor]
        result = bd_rate(anchor, shifted)
        assert result < 0.0

    def test_no_overlap(self, anchor):
        far = [RDPoint(rate=p.rate, psnr=p.psnr + 20.0) for p in anchor]
        with pytest.raises(BDRateError):
            bd_rate(anchor, far)

    def test_unknown_method(self, anchor):
        with pytest.raises(BDRateError):
            bd_rate(anchor, anchor, "linear")


class TestClassRows:

    def test_grouped_by_class(self):
        results = {
            "BQSquare": DeltaReport(delta_psnr=0.4, delta_ssim=0.01, frames=10),
            "RaceHorses": DeltaReport(delta_psnr=0.6, delta_ssim=0.02, frames=10),
            "Johnny": DeltaReport(delta_psnr=1.0, delta_ssim=0.005, frames=10),
        }
        rows = class_average_rows(results)
        assert [r[0] for r in rows] == ["D", "E", "Average"]
        assert rows[0][1] == pytest.approx(0.5)
        assert rows[0][2] == pytest.approx(1.5)
        assert rows[2][1] == pytest.approx(2.0 / 3.0)

    def test_empty(self):
        assert class_average_rows({}) == []

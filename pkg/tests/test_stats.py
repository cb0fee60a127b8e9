"""Statistical verification layer: the normality test, binomial
intervals and the rejection-rate experiment harness."""

import json
import math

import numpy as np
import pytest

from gpforge import (
    ExperimentConfig,
    KernelParams,
    SampleMethod,
    binomial_ci,
    cvm_statistic,
    cvm_test,
    fidelity_rescaler,
    rejection_rate_experiment,
    report_csv_lines,
    report_to_json,
)

PARAMS = KernelParams(variance=1.0, lengthscale=1.0, noise_variance=0.25, dim=2)
SHORT = KernelParams(variance=1.0, lengthscale=0.1, noise_variance=0.25, dim=2)


class TestCvmStatistic:
    def test_single_zero_observation(self):
        # probs and plotting positions coincide, leaving only the 1/(12n) term
        assert cvm_statistic(np.array([0.0])) == pytest.approx(1.0 / 12.0, rel=1e-14)

    def test_order_invariance(self):
        rng = np.random.default_rng(5)
        z = rng.standard_normal(64)
        shuffled = z[rng.permutation(64)]
        assert cvm_statistic(z) == cvm_statistic(shuffled)

    def test_null_median_matches_asymptotic_value(self):
        rng = np.random.default_rng(12345)
        stats = [cvm_statistic(rng.standard_normal(100)) for _ in range(5000)]
        assert np.median(stats) == pytest.approx(0.119, abs=0.01)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            cvm_statistic(np.array([]))
        with pytest.raises(ValueError):
            cvm_statistic(np.array([[0.0, 1.0]]))
        with pytest.raises(ValueError):
            cvm_statistic(np.array([0.0, np.nan]))


class TestCvmTest:
    def test_quantile_grid_accepted_at_every_level(self):
        import scipy.special

        u = (np.arange(1, 201) - 0.5) / 200.0
        z = scipy.special.ndtri(u)
        for alpha in (0.10, 0.05, 0.01):
            res = cvm_test(z, alpha)
            assert not res.reject
            assert res.alpha == alpha

    def test_gross_shift_rejected_at_every_level(self):
        z = np.full(100, 5.0)
        for alpha in (0.10, 0.05, 0.01):
            assert cvm_test(z, alpha).reject

    def test_critical_values_wired_to_levels(self):
        z = np.zeros(10)
        assert cvm_test(z, 0.10).critical_value == 0.347
        assert cvm_test(z, 0.05).critical_value == 0.461
        assert cvm_test(z, 0.01).critical_value == 0.743

    def test_unsupported_level(self):
        with pytest.raises(ValueError):
            cvm_test(np.zeros(10), 0.2)

    def test_null_type_one_error_rate(self):
        """5000 standard-normal samples of size 256: the rejection rate
        at the 5 percent level sits near nominal."""
        rng = np.random.default_rng(999)
        rej = sum(cvm_test(rng.standard_normal(256), 0.05).reject for _ in range(5000))
        assert 0.042 <= rej / 5000 <= 0.058


class TestBinomialCi:
    def test_worked_interval(self):
        lo, hi = binomial_ci(0.05, 1000)
        assert lo == pytest.approx(0.0365, abs=5e-4)
        assert hi == pytest.approx(0.0635, abs=5e-4)

    def test_degenerate_rate_keeps_positive_width(self):
        lo, hi = binomial_ci(0.0, 200)
        assert lo == 0.0
        assert hi > 0.0
        lo1, hi1 = binomial_ci(1.0, 200)
        assert hi1 == 1.0
        assert lo1 < 1.0

    def test_width_scales_with_inverse_root_of_repeats(self):
        w100 = np.diff(binomial_ci(0.2, 100))[0]
        w400 = np.diff(binomial_ci(0.2, 400))[0]
        assert w100 / w400 == pytest.approx(2.0, rel=1e-10)

    def test_domain(self):
        with pytest.raises(ValueError):
            binomial_ci(1.1, 100)
        with pytest.raises(ValueError):
            binomial_ci(0.5, 0)


class TestFidelityRescaler:
    def test_growth_laws(self):
        n = 64
        assert fidelity_rescaler(SampleMethod.Rff, n) == pytest.approx(n**2 * math.log(n))
        assert fidelity_rescaler(SampleMethod.Ciq, n) == pytest.approx(
            math.sqrt(n) * math.log(n)
        )
        assert fidelity_rescaler(SampleMethod.CiqPreconditioned, n) == pytest.approx(
            n**0.375 * math.log(n)
        )
        assert fidelity_rescaler(SampleMethod.Exact, n) is None


class TestExperimentConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(method=SampleMethod.Exact, n_list=(), params=PARAMS)
        with pytest.raises(ValueError):
            ExperimentConfig(method=SampleMethod.Rff, n_list=(16,), params=PARAMS)
        with pytest.raises(ValueError):
            ExperimentConfig(
                method=SampleMethod.Exact, n_list=(16,), params=PARAMS, alpha=0.2
            )
        with pytest.raises(ValueError):
            ExperimentConfig(
                method=SampleMethod.Ciq,
                n_list=(16,),
                params=PARAMS,
                fidelity_grid=(4.0,),
                eta=1.0,
            )


class TestRejectionRateExperiment:
    def test_exact_sampler_rejected_at_nominal_rate(self):
        """A faithful sampler is rejected at roughly the test level;
        with 500 repeats the rate must land inside the acceptance band
        around 0.05."""
        cfg = ExperimentConfig(
            method=SampleMethod.Exact,
            n_list=(256,),
            params=PARAMS,
            repeats=500,
            base_seed=11,
        )
        report = rejection_rate_experiment(cfg)
        cell = report.cells[0]
        assert 0.026 <= cell.rate <= 0.076
        assert report.baseline == report.cells
        assert cell.method == "exact"
        assert cell.fidelity is None and cell.rescaled_fidelity is None

    def test_crude_feature_count_detected(self):
        """Two random features cannot mimic a short-lengthscale kernel
        at n=256; the harness must reject far above the test level."""
        cfg = ExperimentConfig(
            method=SampleMethod.Rff,
            n_list=(256,),
            params=SHORT,
            fidelity_grid=(2.0,),
            repeats=100,
            base_seed=77,
        )
        report = rejection_rate_experiment(cfg)
        assert report.cells[0].rate > 0.5
        assert report.baseline[0].method == "exact"
        assert report.baseline[0].rate < 0.2

    def test_deterministic_given_base_seed(self):
        cfg = ExperimentConfig(
            method=SampleMethod.Rff,
            n_list=(32, 64),
            params=PARAMS,
            fidelity_grid=(8.0, 32.0),
            repeats=40,
            base_seed=123,
        )
        a = rejection_rate_experiment(cfg)
        b = rejection_rate_experiment(cfg)
        assert a.cells == b.cells
        assert a.baseline == b.baseline

    def test_thread_count_does_not_change_results(self):
        cfg = ExperimentConfig(
            method=SampleMethod.Ciq,
            n_list=(24, 48),
            params=PARAMS,
            fidelity_grid=(2.0, 8.0),
            repeats=30,
            base_seed=321,
        )
        serial = rejection_rate_experiment(cfg, threads=1)
        threaded = rejection_rate_experiment(cfg, threads=2)
        assert serial.cells == threaded.cells
        assert serial.baseline == threaded.baseline

    def test_broken_cell_is_isolated(self):
        """A fidelity value the sampler cannot digest marks its own
        cell failed and leaves the rest of the sweep intact."""
        cfg = ExperimentConfig(
            method=SampleMethod.Rff,
            n_list=(16,),
            params=PARAMS,
            fidelity_grid=(float("nan"), 16.0),
            repeats=10,
            base_seed=5,
        )
        report = rejection_rate_experiment(cfg)
        bad, good = report.cells
        assert bad.failed and math.isnan(bad.rate) and bad.message != ""
        assert not good.failed and 0.0 <= good.rate <= 1.0

    def test_rescaled_fidelity_column(self):
        cfg = ExperimentConfig(
            method=SampleMethod.Rff,
            n_list=(64,),
            params=PARAMS,
            fidelity_grid=(128.0,),
            repeats=5,
            base_seed=9,
        )
        cell = rejection_rate_experiment(cfg).cells[0]
        assert cell.rescaled_fidelity == pytest.approx(128.0 / (64**2 * math.log(64)))

    def test_fractional_grid_multiplies_growth_law(self):
        cfg = ExperimentConfig(
            method=SampleMethod.Rff,
            n_list=(64,),
            params=PARAMS,
            fidelity_grid=(0.01,),
            fidelity_as_fraction=True,
            repeats=5,
            base_seed=9,
        )
        cell = rejection_rate_experiment(cfg).cells[0]
        assert cell.fidelity == pytest.approx(0.01 * 64**2 * math.log(64))
        assert cell.rescaled_fidelity == pytest.approx(0.01)


class TestReportSerialization:
    def make_report(self):
        cfg = ExperimentConfig(
            method=SampleMethod.Rff,
            n_list=(16,),
            params=PARAMS,
            fidelity_grid=(8.0, float("nan")),
            repeats=5,
            base_seed=2,
        )
        return rejection_rate_experiment(cfg)

    def test_csv_header_and_shape(self):
        lines = report_csv_lines(self.make_report())
        assert lines[0] == "n,fidelity,rate,ci_low,ci_high,repeats,method,rescaled_fidelity"
        assert len(lines) == 3
        fields = lines[1].split(",")
        assert fields[0] == "16" and fields[6] == "rff"

    def test_csv_exact_rows_leave_fidelity_blank(self):
        cfg = ExperimentConfig(
            method=SampleMethod.Exact, n_list=(8,), params=PARAMS, repeats=5, base_seed=2
        )
        lines = report_csv_lines(rejection_rate_experiment(cfg))
        fields = lines[1].split(",")
        assert fields[1] == "" and fields[7] == ""

    def test_json_round_trip(self):
        report = self.make_report()
        doc = json.loads(report_to_json(report))
        assert doc["config"]["method"] == "rff"
        assert doc["config"]["base_seed"] == 2
        assert len(doc["cells"]) == 2
        assert doc["cells"][1]["failed"] is True
        assert doc["cells"][1]["rate"] is None
        assert len(doc["baseline"]) == 1

import numpy as np
import pytest
from scipy.optimize import minimize_scalar
from scipy.stats import kstest

from opemu import (
    BetaInputSpec,
    DesignSpace,
    InputBasis,
    KernelSpec,
    NigPrior,
    OutputBasis,
    PredictiveSeries,
    SweepSpec,
    fit,
    max_elevation,
    maximin_lhd,
    sample_beta,
    sensitivity_sweep,
    toy_simulate,
    toy_training_set,
    uq_monte_carlo,
)
from opemu.analysis import save_histogram_csv, save_quantiles_csv


class TestMaxElevation:
    def test_picks_largest_location(self):
        series = PredictiveSeries([0, 1, 2], [0.1, 0.9, 0.3], [0.0] * 3, dof=5.0)
        assert max_elevation(series) == 0.9

    def test_all_negative(self):
        series = PredictiveSeries([0, 1, 2], [-0.5, -0.1, -0.9], [0.0] * 3, dof=5.0)
        assert max_elevation(series) == -0.1

    def test_pessimistic_uses_upper_bound(self):
        series = PredictiveSeries([0, 1], [0.0, 0.5], [1.0, 0.0], dof=1e9)
        assert abs(max_elevation(series, pessimistic=True) - 1.959964) < 1e-3

    def test_toy_grid_max_near_continuous_max(self):
        # oracle: continuous maximization of the closed-form toy series
        r = [-1.0, 1.5, 2.0]
        dt = 0.2
        grid = np.round(dt * np.arange(176), 12)
        values = toy_simulate(r, grid)
        grid_argmax = grid[np.argmax(values)]
        res = minimize_scalar(
            lambda t: -toy_simulate(r, [t])[0],
            bounds=(max(grid_argmax - dt, 0.0), grid_argmax + dt),
            method="bounded",
            options={"xatol": 1e-10},
        )
        true_max, true_argmax = -res.fun, res.x
        assert values.max() <= true_max + 1e-12
        assert abs(true_argmax - grid_argmax) <= dt


@pytest.fixture(scope="module")
def toy_model():
    space = DesignSpace(bounds=[(-3.0, 1.0), (1.0, 2.0), (0.5, 3.0)],
                        names=("x0", "u0", "c"))
    design = maximin_lhd(16, space, seed=4, candidates=20)
    grid = np.round(0.25 * np.arange(61), 12)
    train = toy_training_set(design, grid)
    ib, ob = InputBasis(space), OutputBasis()
    prior = NigPrior.isotropic(77, 0.01, 3.0, 0.1)
    kern = KernelSpec((2.0, 1.0, 0.6), 1.5)
    return fit(prior, ib, ob, kern, train)


class TestSweep:
    def test_two_point_resolution(self, toy_model):
        spec = SweepSpec(dim=1, lower=1.0, upper=2.0, fixed=(-1.0, 0.0, 1.5),
                         resolution=2)
        curve = sensitivity_sweep(toy_model, spec)
        assert curve.values.size == 2
        assert curve.n_evaluations == 2

    def test_monotone_in_speed(self, toy_model):
        # the toy's amplitude is linear in the speed input
        spec = SweepSpec(dim=1, lower=1.0, upper=2.0, fixed=(-1.0, 0.0, 1.5),
                         resolution=11)
        curve = sensitivity_sweep(toy_model, spec)
        assert np.all(np.diff(curve.max_elev) > -1e-9)

    def test_deterministic(self, toy_model):
        spec = SweepSpec(dim=0, lower=-2.0, upper=0.0, fixed=(0.0, 1.5, 1.5),
                         resolution=7)
        a = sensitivity_sweep(toy_model, spec)
        b = sensitivity_sweep(toy_model, spec)
        assert np.array_equal(a.max_elev, b.max_elev)

    def test_rejects_outside_box(self, toy_model):
        with pytest.raises(ValueError, match="design box"):
            sensitivity_sweep(
                toy_model,
                SweepSpec(dim=0, lower=-5.0, upper=0.0, fixed=(0.0, 1.5, 1.5)),
            )

    def test_rejects_low_resolution(self):
        with pytest.raises(ValueError):
            SweepSpec(dim=0, lower=0.0, upper=1.0, fixed=(0.0,), resolution=1)


class TestSampleBeta:
    def test_uniform_special_case_ks(self):
        spec = BetaInputSpec(dims=((1.0, 1.0, 0.0, 1.0),))
        samples = sample_beta(spec, 1000, seed=5)[:, 0]
        assert kstest(samples, "uniform").pvalue >= 0.01

    def test_skewed_mean_on_shifted_interval(self):
        # Be(5,2) on [-2,0]: mean -2 + 2*(5/7) = -4/7
        spec = BetaInputSpec(dims=((5.0, 2.0, -2.0, 0.0),))
        x = sample_beta(spec, 1000, seed=6)[:, 0]
        se = 2.0 * np.sqrt(10.0 / (49.0 * 8.0)) / np.sqrt(1000)
        assert abs(x.mean() - (-4.0 / 7.0)) < 3 * se

    def test_left_skewed_mean(self):
        # Be(2,5) on [1,2]: mean 1 + 2/7 = 9/7
        spec = BetaInputSpec(dims=((2.0, 5.0, 1.0, 2.0),))
        x = sample_beta(spec, 1000, seed=6)[:, 0]
        se = np.sqrt(10.0 / (49.0 * 8.0)) / np.sqrt(1000)
        assert abs(x.mean() - 9.0 / 7.0) < 3 * se

    def test_reproducible(self):
        spec = BetaInputSpec(dims=((5.0, 2.0, -2.0, 0.0), (2.0, 5.0, 1.0, 2.0)))
        assert np.array_equal(sample_beta(spec, 50, 3), sample_beta(spec, 50, 3))

    def test_respects_bounds(self):
        spec = BetaInputSpec(dims=((0.5, 0.5, 2.0, 3.0),))
        x = sample_beta(spec, 500, seed=1)
        assert x.min() >= 2.0 and x.max() <= 3.0

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            BetaInputSpec(dims=((0.0, 1.0, 0.0, 1.0),))
        with pytest.raises(ValueError):
            BetaInputSpec(dims=((1.0, 1.0, 1.0, 0.5),))
        with pytest.raises(ValueError):
            sample_beta(BetaInputSpec(dims=((1.0, 1.0, 0.0, 1.0),)), 0, 1)


def default_beta():
    return BetaInputSpec(
        dims=((5.0, 2.0, -2.0, 0.0), (2.0, 5.0, 1.0, 2.0), (2.0, 5.0, 0.5, 2.5))
    )


class TestUqMonteCarlo:
    def test_table_shape_and_monotonicity(self, toy_model):
        result = uq_monte_carlo(toy_model, default_beta(), n=300, seed=9)
        for summary in (result.max_elevation, result.mean_ci_length):
            assert summary.levels == (1.0, 5.0, 50.0, 95.0, 99.0)
            assert summary.values.size == 5
            assert np.all(np.diff(summary.values) >= 0)

    def test_bitwise_reproducible(self, toy_model):
        a = uq_monte_carlo(toy_model, default_beta(), n=200, seed=4)
        b = uq_monte_carlo(toy_model, default_beta(), n=200, seed=4)
        assert np.array_equal(a.max_elevation.values, b.max_elevation.values)
        assert np.array_equal(a.histogram_counts, b.histogram_counts)

    def test_threaded_matches_serial(self, toy_model):
        a = uq_monte_carlo(toy_model, default_beta(), n=150, seed=2, threads=1)
        b = uq_monte_carlo(toy_model, default_beta(), n=150, seed=2, threads=4)
        assert np.array_equal(a.max_elevation.values, b.max_elevation.values)

    def test_point_mass_limit_shrinks_spread(self, toy_model):
        concentrated = BetaInputSpec(
            dims=((5000.0, 5000.0, -2.0, 0.0), (5000.0, 5000.0, 1.0, 2.0),
                  (5000.0, 5000.0, 0.5, 2.5))
        )
        wide = uq_monte_carlo(toy_model, default_beta(), n=300, seed=3)
        narrow = uq_monte_carlo(toy_model, concentrated, n=300, seed=3)
        spread = lambda s: s.values[-1] - s.values[0]
        assert spread(narrow.max_elevation) < 0.1 * spread(wide.max_elevation)

    def test_warns_on_small_sample(self, toy_model):
        with pytest.warns(UserWarning, match="low"):
            uq_monte_carlo(toy_model, default_beta(), n=50, seed=1)

    def test_histogram_accounts_all_samples(self, toy_model):
        result = uq_monte_carlo(toy_model, default_beta(), n=250, seed=8)
        assert result.histogram_counts.sum() == 250

    def test_exports(self, toy_model, tmp_path):
        result = uq_monte_carlo(toy_model, default_beta(), n=150, seed=8)
        qpath = tmp_path / "quantiles.csv"
        hpath = tmp_path / "hist.csv"
        save_quantiles_csv(result, str(qpath), meta={"seed": 8})
        save_histogram_csv(result, str(hpath))
        qlines = qpath.read_text().splitlines()
        assert qlines[0] == "# seed=8"
        assert qlines[1].startswith("statistic,p1,p5,p50,p95,p99")
        assert qlines[2].startswith("max-elevation,")
        assert qlines[3].startswith("mean-CI-length,")
        hlines = hpath.read_text().splitlines()
        assert hlines[0] == "bin_lo,bin_hi,count"

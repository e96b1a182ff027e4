import numpy as np
import pytest
from scipy.stats import t as student_t

import reference
from opemu import (
    InputBasis,
    KernelSpec,
    NigPrior,
    OutputBasis,
    PredictiveSeries,
    TrainingSet,
    credible_interval,
    fit,
    lhd,
    load_model,
    save_model,
    toy_training_set,
)
from opemu.design import DesignSpace


def small_problem(n=2, q=3, seed=0, k=3, freqs=(0.25, 0.5)):
    space = DesignSpace(bounds=[(-3, 1), (1, 2), (0.5, 3)][:k])
    design = lhd(n, space, seed)
    grid = np.linspace(0.0, 2.0, q)
    rng = np.random.default_rng(seed + 100)
    F = rng.normal(size=(n, q))
    train = TrainingSet(design, grid, F)
    ib, ob = InputBasis(space), OutputBasis(freqs)
    kern = KernelSpec((1.0, 0.5, 0.8)[:k], 0.9)
    return train, ib, ob, kern


def dense_problem(train, ib, ob, kern, jitter):
    return reference.dense_matrices(
        train.design.points,
        train.time_grid,
        train.design.space.bounds,
        ob.frequencies,
        kern.input_lengths,
        kern.output_length,
        kern.exponent,
        jitter,
    )


class TestFitAgainstDenseOracle:
    def test_toy_instance_posterior(self):
        train, ib, ob, kern = small_problem(n=2, q=3, seed=1)
        jitter = 1e-8
        sigma2, a, d = 0.3, 3.0, 0.4
        nu = ib.size * ob.size
        prior = NigPrior.isotropic(nu, sigma2, a, d)
        model = fit(prior, ib, ob, kern, train, jitter)

        K, Q = dense_problem(train, ib, ob, kern, jitter)
        mn, Vn, an, dn = reference.dense_fit(
            train.outputs, K, Q, np.zeros(nu), sigma2 * np.eye(nu), a, d
        )
        assert np.abs(model.coeff_mean - mn).max() < 1e-8
        assert np.abs(model.coeff_cov - Vn).max() < 1e-8
        assert model.dof == an
        assert abs(model.scale - dn) / dn < 1e-8

    @pytest.mark.parametrize("seed", range(4))
    @pytest.mark.parametrize("n,q", [(2, 3), (4, 5), (3, 2)])
    def test_posterior_and_predictive_random_instances(self, n, q, seed):
        train, ib, ob, kern = small_problem(n=n, q=q, seed=seed)
        jitter = 1e-8
        nu = ib.size * ob.size
        prior = NigPrior.isotropic(nu, 0.25, 3.0, 0.5)
        model = fit(prior, ib, ob, kern, train, jitter)

        K, Q = dense_problem(train, ib, ob, kern, jitter)
        mn, Vn, an, dn = reference.dense_fit(
            train.outputs, K, Q, prior.mean, prior.cov, prior.dof, prior.scale
        )
        assert np.abs(model.coeff_mean - mn).max() < 1e-8 * (1 + np.abs(mn).max())
        assert np.abs(model.coeff_cov - Vn).max() < 1e-8

        rng = np.random.default_rng(seed + 7)
        r = train.design.space.from_unit(rng.random(3))[0]
        times = np.array([0.3, 1.7])
        series = model.predict(r, times)
        gr = reference.input_regressors(r, train.design.space.bounds)
        kr = np.array([
            reference.correlation(r, 0, p, 0, kern.input_lengths, 1.0, kern.exponent)
            for p in train.design.points
        ])
        for j, t in enumerate(times):
            gs = reference.output_regressors(t, ob.frequencies)
            ks = np.array([
                reference.correlation([0], t, [0], tg, (1.0,), kern.output_length,
                                      kern.exponent)
                for tg in train.time_grid
            ])
            loc, scale = reference.dense_predict(
                train.outputs, K, Q, mn, Vn, an, dn,
                np.kron(gr, gs), np.kron(kr, ks), (1 + jitter) ** 2,
            )
            assert abs(series.location[j] - loc) < 1e-8 * (1 + abs(loc))
            assert abs(series.scale[j] - scale) < 1e-8 * (1 + abs(scale))

    def test_positive_posterior_scalars(self):
        train, ib, ob, kern = small_problem(n=3, q=4, seed=5)
        prior = NigPrior.isotropic(ib.size * ob.size, 0.1, 3.0, 0.2)
        model = fit(prior, ib, ob, kern, train)
        assert model.dof > 0
        assert model.scale > 0

    def test_zero_data_zero_posterior_mean(self):
        train, ib, ob, kern = small_problem(n=3, q=4, seed=2)
        train = TrainingSet(train.design, train.time_grid, np.zeros_like(train.outputs))
        prior = NigPrior.isotropic(ib.size * ob.size, 0.1, 3.0, 0.2)
        model = fit(prior, ib, ob, kern, train)
        assert np.abs(model.coeff_mean).max() == 0.0

    def test_dimension_mismatch(self):
        train, ib, ob, kern = small_problem()
        with pytest.raises(ValueError, match="coefficients"):
            fit(NigPrior.isotropic(5, 0.1, 3.0, 0.2), ib, ob, kern, train)


class TestPredictionBehavior:
    def test_interpolates_training_data(self, wave_space):
        design = lhd(8, wave_space, 3)
        grid = np.round(0.5 * np.arange(9), 12)
        train = toy_training_set(design, grid)
        ib, ob = InputBasis(wave_space), OutputBasis()
        prior = NigPrior.isotropic(77, 0.05, 3.0, 0.1)
        jitter = 1e-8
        model = fit(prior, ib, ob, KernelSpec((1.0, 0.5, 0.8), 1.0), train, jitter)
        std = train.outputs.std()
        for i in range(train.n):
            series = model.predict(design.points[i])
            gap = np.abs(series.location - train.outputs[i]).max()
            assert gap <= 100 * np.sqrt(jitter) * std
            assert series.scale.max() <= 10 * np.sqrt(jitter) * std
            # jitter-limited absolute bounds
            assert gap <= 1e-4
            assert series.scale.max() <= 1e-3

    def test_far_point_falls_back_to_regression(self, wave_space):
        # vanishing kernel weights leave the regression mean and prior scale
        design = lhd(6, wave_space, 4)
        grid = np.round(0.5 * np.arange(7), 12)
        train = toy_training_set(design, grid)
        ib, ob = InputBasis(wave_space), OutputBasis()
        prior = NigPrior.isotropic(77, 0.05, 3.0, 0.1)
        kern = KernelSpec((1e-3, 1e-3, 1e-3), 1.0)
        model = fit(prior, ib, ob, kern, train)
        r = np.array([-0.987, 1.456, 2.345])  # not close to any design point
        series = model.predict(r)
        regression = ib.evaluate(r) @ model.coeff_matrix @ ob.evaluate_many(grid).T
        assert np.abs(series.location - regression).max() < 1e-6
        floor = np.sqrt(model.tau_estimate)  # at least the residual prior level
        assert np.all(series.scale >= 0.99 * floor)

    def test_extrapolation_flag(self, wave_space):
        design = lhd(5, wave_space, 6)
        grid = np.round(0.5 * np.arange(5), 12)
        train = toy_training_set(design, grid)
        model = fit(
            NigPrior.isotropic(77, 0.05, 3.0, 0.1),
            InputBasis(wave_space), OutputBasis(),
            KernelSpec((1.0, 0.5, 0.8), 1.0), train,
        )
        assert not model.predict([-1.0, 1.5, 1.7]).extrapolation
        assert model.predict([5.0, 1.5, 1.7]).extrapolation
        assert model.predict([-1.0, 1.5, 1.7], times=[10.0]).extrapolation

    def test_posterior_contraction_at_added_point(self, wave_space):
        # adding a training run at the prediction site shrinks its scale
        grid = np.round(0.5 * np.arange(7), 12)
        ib, ob = InputBasis(wave_space), OutputBasis()
        prior = NigPrior.isotropic(77, 0.05, 3.0, 0.1)
        kern = KernelSpec((1.0, 0.5, 0.8), 1.0)
        design = lhd(5, wave_space, 7)
        train = toy_training_set(design, grid)
        r_new = np.array([-1.3, 1.6, 2.2])
        before = fit(prior, ib, ob, kern, train).predict(r_new)

        from opemu.design import Design
        from opemu.simulator import toy_simulate

        pts = np.vstack([design.points, r_new])
        bigger = Design(pts, wave_space.to_unit(pts), wave_space)
        train2 = TrainingSet(bigger, grid,
                             np.vstack([train.outputs, toy_simulate(r_new, grid)]))
        after = fit(prior, ib, ob, kern, train2).predict(r_new)
        assert np.all(after.scale <= before.scale * (1 + 1e-9) + 1e-12)

    def test_dof_grows_by_q_per_point(self, wave_space):
        grid = np.round(0.5 * np.arange(7), 12)
        ib, ob = InputBasis(wave_space), OutputBasis()
        prior = NigPrior.isotropic(77, 0.05, 3.0, 0.1)
        kern = KernelSpec((1.0, 0.5, 0.8), 1.0)
        m5 = fit(prior, ib, ob, kern, toy_training_set(lhd(5, wave_space, 1), grid))
        m6 = fit(prior, ib, ob, kern, toy_training_set(lhd(6, wave_space, 1), grid))
        assert m6.dof - m5.dof == len(grid)

    def test_scale_nonnegative_and_clamp_counted(self, wave_space):
        design = lhd(10, wave_space, 9)
        grid = np.round(0.2 * np.arange(30), 12)
        train = toy_training_set(design, grid)
        model = fit(
            NigPrior.isotropic(77, 0.05, 3.0, 0.1),
            InputBasis(wave_space), OutputBasis(),
            KernelSpec((1.5, 0.8, 1.2), 1.5), train,
        )
        for i in range(train.n):
            series = model.predict(design.points[i])
            assert np.all(series.scale >= 0.0)
            assert series.clamped >= 0
            assert series.min_unit_variance >= -1e-12


class TestCredibleInterval:
    def test_zero_scale_degenerates(self):
        series = PredictiveSeries([0.0, 1.0], [1.5, -2.0], [0.0, 0.0], dof=10.0)
        lo, hi = credible_interval(series, 0.95)
        assert np.array_equal(lo, series.location)
        assert np.array_equal(hi, series.location)

    def test_normal_limit(self):
        series = PredictiveSeries([0.0], [0.0], [1.0], dof=1e9)
        lo, hi = credible_interval(series, 0.95)
        assert abs(hi[0] - 1.959964) < 1e-4

    def test_dof_three_quantile(self):
        # Student-t table value at 97.5%, 3 dof
        series = PredictiveSeries([0.0], [0.0], [1.0], dof=3.0)
        lo, hi = credible_interval(series, 0.95)
        oracle = student_t.ppf(0.975, 3.0)
        assert abs(hi[0] - oracle) < 1e-12
        assert abs(hi[0] - 3.18245) < 5e-5
        assert lo[0] == -hi[0]

    def test_rejects_bad_level(self):
        series = PredictiveSeries([0.0], [0.0], [1.0], dof=3.0)
        with pytest.raises(ValueError):
            credible_interval(series, 1.5)


class TestSerialization:
    def test_round_trip_preserves_predictions(self, wave_space, tmp_path):
        design = lhd(6, wave_space, 11)
        grid = np.round(0.5 * np.arange(8), 12)
        train = toy_training_set(design, grid)
        model = fit(
            NigPrior.isotropic(77, 0.05, 3.0, 0.1),
            InputBasis(wave_space), OutputBasis(),
            KernelSpec((1.0, 0.5, 0.8), 1.0), train,
        )
        path = tmp_path / "model.json"
        save_model(model, str(path), meta={"seed": 11})
        loaded = load_model(str(path))
        assert loaded.training_fingerprint == model.training_fingerprint
        r = [-0.5, 1.2, 2.7]
        a, b = model.predict(r), loaded.predict(r)
        assert np.abs(a.location - b.location).max() < 1e-12
        assert np.abs(a.scale - b.scale).max() < 1e-12
        assert a.dof == b.dof

    def test_rejects_non_model_json(self, tmp_path):
        from opemu.errors import DataError

        path = tmp_path / "junk.json"
        path.write_text('{"format": "something-else"}')
        with pytest.raises(DataError):
            load_model(str(path))


class TestTrainingSet:
    def test_rejects_non_finite(self, wave_space):
        design = lhd(3, wave_space, 0)
        F = np.zeros((3, 4))
        F[1, 2] = np.nan
        from opemu.errors import DataError

        with pytest.raises(DataError, match="row 1"):
            TrainingSet(design, [0.0, 0.5, 1.0, 1.5], F)

    def test_rejects_decreasing_grid(self, wave_space):
        design = lhd(3, wave_space, 0)
        with pytest.raises(ValueError, match="increasing"):
            TrainingSet(design, [0.0, 1.0, 0.5], np.zeros((3, 3)))

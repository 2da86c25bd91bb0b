import numpy as np
import pytest

import oracles
from probetomo import (
    DensityMatrix,
    ShotConfig,
    debias,
    depolarize,
    plain_settings,
    sample_signal,
    simulate_exact,
    superposition_state,
)
from probetomo.response import ExperimentSetting, SignalSeries


def constant_series(value, n=5, odd=0.0, kind="plain"):
    settings = tuple(ExperimentSetting(k=float(i)) for i in range(n))
    return SignalSeries(settings, np.full(n, value), np.full(n, odd), kind=kind)


class TestShotConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            ShotConfig(0)
        with pytest.raises(ValueError):
            ShotConfig(10, detector_error=0.6)
        with pytest.raises(ValueError):
            ShotConfig(10, detector_error=-0.1)

    def test_accepts_boundary(self):
        assert ShotConfig(1, detector_error=0.5).detector_error == 0.5


class TestSampleSignal:
    def test_certain_outcome_without_noise(self):
        series = constant_series(1.0)
        out = sample_signal(series, ShotConfig(37, detector_error=0.0, rng_seed=1))
        np.testing.assert_array_equal(out.even_values, np.ones(5))
        assert out.shots_per_point == 37

    def test_requires_exact_input(self):
        sampled = sample_signal(constant_series(0.2),
                                ShotConfig(10, 0.0, 3))
        with pytest.raises(ValueError):
            sample_signal(sampled, ShotConfig(10, 0.0, 3))

    def test_rejects_unphysical_values(self):
        # the combined-coupling kind skips the plain-series magnitude check,
        # so the sampler's own probability validation has to catch this
        series = constant_series(1.2, n=2, kind="tilde")
        with pytest.raises(ValueError, match="unphysical"):
            sample_signal(series, ShotConfig(10, 0.0, 3))

    def test_reproducible(self):
        exact = constant_series(0.3, odd=0.1)
        config = ShotConfig(500, detector_error=0.02, rng_seed=42)
        first = sample_signal(exact, config)
        second = sample_signal(exact, config)
        np.testing.assert_array_equal(first.even_values, second.even_values)
        np.testing.assert_array_equal(first.odd_values, second.odd_values)

    def test_estimates_stay_in_range(self):
        exact = constant_series(-0.95, odd=0.3)
        out = sample_signal(exact, ShotConfig(50, detector_error=0.3, rng_seed=7))
        assert np.all(out.even_values >= -1.0) and np.all(out.even_values <= 1.0)
        assert np.all(out.odd_values >= -1.0) and np.all(out.odd_values <= 1.0)

    def test_detector_error_shrinks_expectation(self):
        # Bernoulli mixture: E[estimate] = (1 - 2e) * value. Checked at 10^6
        # shots against the 3 sigma binomial band.
        value, error, shots = 0.6, 0.05, 10**6
        exact = constant_series(value, n=1)
        out = sample_signal(exact, ShotConfig(shots, error, rng_seed=11))
        expected = (1 - 2 * error) * value
        p = 0.5 * (1 + expected)
        sigma = 2 * np.sqrt(p * (1 - p) / shots)
        assert abs(out.even_values[0] - expected) < 3 * sigma

    def test_spread_matches_binomial(self):
        value, shots = 0.4, 400
        exact = constant_series(value, n=1)
        estimates = [sample_signal(exact, ShotConfig(shots, 0.0, seed)).even_values[0]
                     for seed in range(100)]
        p = 0.5 * (1 + value)
        predicted = 2 * np.sqrt(p * (1 - p) / shots)
        observed = np.std(estimates)
        assert predicted / 1.2 < observed < predicted * 1.2

    def test_depolarized_data_tracks_depolarized_curve(self):
        # Sampled signals of the eps = 0.1 state sit on the depolarized
        # curve, not on the clean one.
        state = superposition_state([(n, 1) for n in range(4)], cutoff=4)
        rho_eps = depolarize(state.density_matrix(), 0.1)
        settings = plain_settings(6.0, 0.1)
        exact_eps = simulate_exact(rho_eps, settings)
        exact_clean = simulate_exact(state.density_matrix(), settings)
        sampled = debias(sample_signal(exact_eps, ShotConfig(10_000, 0.01, rng_seed=5)),
                         0.01)
        err_eps = np.mean(np.abs(sampled.even_values - exact_eps.even_values))
        err_clean = np.mean(np.abs(sampled.even_values - exact_clean.even_values))
        assert err_eps < err_clean


class TestDebias:
    def test_identity_without_error(self):
        series = sample_signal(constant_series(0.44), ShotConfig(100, 0.0, 2))
        out = debias(series, 0.0)
        np.testing.assert_array_equal(out.even_values, series.even_values)

    def test_direct_formula(self):
        settings = plain_settings(1.0, 1.0)
        series = SignalSeries(settings, [0.49, 0.49], [0.0, 0.0], shots_per_point=10)
        out = debias(series, 0.01)
        np.testing.assert_allclose(out.even_values, [0.5, 0.5], atol=1e-15)

    def test_clamps_to_physical_range(self):
        settings = plain_settings(0.5, 0.5)
        series = SignalSeries(settings, [0.995, -0.995], [0.0, 0.0], shots_per_point=10)
        out = debias(series, 0.05)
        np.testing.assert_array_equal(out.even_values, [1.0, -1.0])

    def test_rejects_half_error(self):
        series = sample_signal(constant_series(0.1), ShotConfig(10, 0.0, 1))
        with pytest.raises(ValueError):
            debias(series, 0.5)

    def test_round_trip_recovers_truth(self):
        value, error, shots = 0.8, 0.01, 10**5
        exact = constant_series(value, n=1)
        sampled = sample_signal(exact, ShotConfig(shots, error, rng_seed=23))
        recovered = debias(sampled, error).even_values[0]
        bound = 3 * np.sqrt(1 / (4 * shots)) / (1 - 2 * error)
        assert abs(recovered - value) < bound

import numpy as np
import pytest

import oracles
from probetomo import (
    DensityMatrix,
    FockState,
    NumericsError,
    ShotConfig,
    debias,
    depolarize,
    sample_signal,
    simulate_exact,
    superposition_state,
)
from probetomo.mixed import (
    DesignMatrix,
    build_design_matrix,
    default_k_list,
    default_t0_list,
    density_to_parameters,
    fidelity,
    measurement_vector,
    parameter_labels,
    parameters_to_entries,
    solve_density_matrix,
)
from probetomo.response import ExperimentSetting, SignalSeries, rotated_settings


def random_rho(seed, n=4):
    return DensityMatrix(oracles.random_density(np.random.default_rng(seed), n))


def exact_series(rho, k_list, t0_list):
    return simulate_exact(rho, rotated_settings(k_list, t0_list))


def default_design(n=4):
    return build_design_matrix(default_k_list(), default_t0_list(n), n)


class TestParameterization:
    def test_round_trip(self):
        rho = random_rho(1)
        params = density_to_parameters(rho)
        assert params.size == 16
        np.testing.assert_allclose(parameters_to_entries(params, 4), rho.entries,
                                   atol=1e-15)

    def test_labels(self):
        labels = parameter_labels(2)
        assert labels == ["c00", "c11", "Re c01", "Im c01"]


class TestBuildDesignMatrix:
    def test_single_level_structure(self):
        design = build_design_matrix([0.5, 1.0], [0.0], 1)
        assert design.matrix.shape == (4, 1)
        np.testing.assert_allclose(design.matrix[0::2, 0],
                                   np.exp(-np.array([0.5, 1.0])**2 / 4), atol=1e-14)
        np.testing.assert_allclose(design.matrix[1::2, 0], 0.0, atol=1e-14)

    def test_single_rotation_is_rank_deficient(self):
        design = build_design_matrix(np.linspace(0, 3, 10), [0.0], 2)
        assert design.rank == 3
        assert design.condition_number == np.inf
        # the invisible direction is the imaginary part of the coherence
        col = parameter_labels(2).index("Im c01")
        np.testing.assert_allclose(design.matrix[:, col], 0.0, atol=1e-14)

    def test_default_schedule_full_rank(self):
        design = default_design(4)
        assert design.matrix.shape == (2 * 40 * 8, 16)
        assert design.rank == 16
        assert design.condition_number < 10

    def test_predicts_signals(self):
        # A @ params must equal the forward-model signals row for row.
        rho = random_rho(7)
        design = build_design_matrix(np.linspace(0.2, 4.0, 7), default_t0_list(4)[:5], 4)
        series = exact_series(rho, np.linspace(0.2, 4.0, 7), default_t0_list(4)[:5])
        predicted = design.matrix @ density_to_parameters(rho)
        np.testing.assert_allclose(predicted, measurement_vector(design, series),
                                   atol=1e-12)

    def test_adding_rotations_never_hurts_conditioning(self):
        previous = np.inf
        for j in range(1, 9):
            design = build_design_matrix(default_k_list(), default_t0_list(4)[:j], 4)
            current = design.condition_number
            assert current <= previous * (1 + 1e-9)
            previous = current

    def test_rejects_empty_schedules(self):
        with pytest.raises(ValueError):
            build_design_matrix([], [0.0], 2)
        with pytest.raises(ValueError):
            build_design_matrix([1.0], [], 2)


class TestSolveDensityMatrix:
    def test_exact_round_trip(self):
        design = default_design(4)
        for seed in range(5):
            rho = random_rho(seed)
            series = exact_series(rho, default_k_list(), default_t0_list(4))
            recovered, report = solve_density_matrix(design, series)
            assert np.linalg.norm(recovered.entries - rho.entries) < 1e-8
            assert report.residual < 1e-10
            assert not report.projected

    def test_depolarized_projector_recovered_exactly(self):
        state = superposition_state([(n, 1) for n in range(4)], cutoff=4)
        rho = depolarize(state.density_matrix(), 0.1)
        design = default_design(4)
        series = exact_series(rho, default_k_list(), default_t0_list(4))
        recovered, _ = solve_density_matrix(design, series)
        expected = 0.9 * state.density_matrix().entries + 0.025 * np.eye(4)
        assert np.linalg.norm(recovered.entries - expected) < 1e-10

    def test_trace_and_hermiticity_by_construction(self):
        design = default_design(3)
        rho = random_rho(3, n=3)
        series = exact_series(rho, default_k_list(), default_t0_list(3))
        recovered, _ = solve_density_matrix(design, series)
        assert np.trace(recovered.entries).real == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(recovered.entries,
                                   recovered.entries.conj().T, atol=1e-14)

    def test_sampled_data_recovers_with_high_fidelity(self):
        rho = random_rho(11)
        design = default_design(4)
        series = exact_series(rho, default_k_list(), default_t0_list(4))
        sampled = debias(sample_signal(series, ShotConfig(100_000, 0.01, rng_seed=2)),
                         0.01)
        recovered, report = solve_density_matrix(design, sampled)
        assert report.projected
        assert report.ridge > 0
        assert fidelity(recovered, rho) > 0.98

    def test_rank_deficient_without_ridge_refused(self):
        design = build_design_matrix(np.linspace(0, 3, 10), [0.0], 2)
        rho = random_rho(4, n=2)
        series = exact_series(rho, np.linspace(0, 3, 10), [0.0])
        with pytest.raises(NumericsError, match="rank"):
            solve_density_matrix(design, series)
        recovered, report = solve_density_matrix(design, series, ridge=1e-8)
        assert report.ridge == 1e-8
        assert np.trace(recovered.entries).real == pytest.approx(1.0, abs=1e-12)

    def test_single_level_forced_by_trace(self):
        design = build_design_matrix([0.4, 0.9], [0.0], 1)
        series = exact_series(DensityMatrix(np.eye(1)), [0.4, 0.9], [0.0])
        recovered, report = solve_density_matrix(design, series)
        np.testing.assert_allclose(recovered.entries, [[1.0]], atol=1e-15)
        assert report.residual < 1e-12

    def test_row_permutation_invariance(self):
        rho = random_rho(9)
        design = default_design(4)
        series = exact_series(rho, default_k_list(), default_t0_list(4))
        baseline, _ = solve_density_matrix(design, series)

        order = np.random.default_rng(5).permutation(len(design.settings))
        settings = tuple(design.settings[i] for i in order)
        rows = np.ravel([[2 * i, 2 * i + 1] for i in order])
        permuted_design = DesignMatrix(design.matrix[rows], 4, settings)
        permuted_series = SignalSeries(settings, series.even_values[order],
                                       series.odd_values[order])
        permuted, _ = solve_density_matrix(permuted_design, permuted_series)
        assert np.linalg.norm(permuted.entries - baseline.entries) < 1e-12

    def test_misaligned_measurements_rejected(self):
        design = build_design_matrix([0.5, 1.0], [0.0], 2)
        wrong = SignalSeries((ExperimentSetting(k=0.5), ExperimentSetting(k=2.0)),
                             [0.9, 0.8], [0.0, 0.0])
        with pytest.raises(ValueError, match="match"):
            measurement_vector(design, wrong)


class TestFidelity:
    def test_identical_states(self):
        rho = random_rho(13)
        assert fidelity(rho, rho) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_pure_states(self):
        a = FockState(np.array([1.0, 0.0])).density_matrix()
        b = FockState(np.array([0.0, 1.0])).density_matrix()
        assert fidelity(a, b) == pytest.approx(0.0, abs=1e-12)

    def test_pure_against_maximally_mixed(self):
        a = FockState(np.array([1.0, 0.0])).density_matrix()
        b = DensityMatrix(np.eye(2) / 2)
        assert fidelity(a, b) == pytest.approx(0.5, abs=1e-12)

    def test_symmetry(self):
        a, b = random_rho(21), random_rho(22)
        assert fidelity(a, b) == pytest.approx(fidelity(b, a), abs=1e-12)

    def test_cutoff_mismatch_rejected(self):
        with pytest.raises(ValueError):
            fidelity(random_rho(1, n=3), random_rho(1, n=4))

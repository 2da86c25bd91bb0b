import json
import math

import numpy as np
import pytest

import oracles
from probetomo import (
    DensityMatrix,
    FockState,
    PositionGrid,
    TruncationWarning,
    coherent_state,
    depolarize,
    hermite_wavefunction,
    load_state,
    make_standard_state,
    position_amplitude,
    position_density,
    save_state,
    state_from_dict,
    state_to_dict,
    superposition_state,
)


def plus_i_state():
    return superposition_state([(0, 1.0), (1, 1j)], cutoff=2)


class TestHermiteWavefunction:
    def test_ground_state_at_origin(self):
        assert hermite_wavefunction(0, 0.0) == pytest.approx(np.pi**-0.25, abs=1e-14)

    def test_first_excited_vanishes_at_origin(self):
        assert hermite_wavefunction(1, 0.0) == 0.0

    def test_normalization_by_quadrature(self):
        x = np.linspace(-10, 10, 4001)
        values = hermite_wavefunction(3, x)
        assert np.trapezoid(values**2, x) == pytest.approx(1.0, abs=1e-10)

    def test_matches_reference_polynomials(self):
        x = np.linspace(-6, 6, 101)
        for n in range(12):
            np.testing.assert_allclose(
                hermite_wavefunction(n, x), oracles.psi_ref(n, x), atol=1e-12)

    def test_orthonormality(self):
        x = np.linspace(-8, 8, 321)  # dx = 0.05
        table = np.array([hermite_wavefunction(n, x) for n in range(11)])
        gram = np.trapezoid(table[:, None, :] * table[None, :, :], x, axis=-1)
        np.testing.assert_allclose(gram, np.eye(11), atol=1e-8)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            hermite_wavefunction(-1, 0.0)
        with pytest.raises(ValueError):
            hermite_wavefunction(0, np.inf)


class TestFockState:
    def test_normalizes_on_construction(self):
        state = FockState(np.array([3.0, 4.0j]))
        assert np.sum(np.abs(state.amplitudes) ** 2) == pytest.approx(1.0, abs=1e-12)

    def test_rejects_zero_vector(self):
        with pytest.raises(ValueError):
            FockState(np.zeros(3))

    def test_immutable(self):
        state = plus_i_state()
        with pytest.raises(ValueError):
            state.amplitudes[0] = 0.0

    def test_rotation_phases_levels(self):
        state = plus_i_state().rotated(np.pi / 2)
        np.testing.assert_allclose(state.amplitudes,
                                   [1 / np.sqrt(2), (1j) * (-1j) / np.sqrt(2)],
                                   atol=1e-15)


class TestPositionAmplitude:
    def test_vacuum_at_origin(self):
        vac = FockState(np.array([1.0]))
        assert position_amplitude(vac, 0.0) == pytest.approx(np.pi**-0.25, abs=1e-14)

    def test_plus_i_state_at_origin(self):
        # psi_1(0) = 0, so only the vacuum component contributes.
        value = position_amplitude(plus_i_state(), 0.0)
        assert value == pytest.approx(np.pi**-0.25 / np.sqrt(2), abs=1e-14)

    def test_tail_is_negligible(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            state = FockState(oracles.random_pure_amplitudes(rng, 10))
            assert abs(position_amplitude(state, 10.0)) < 1e-8
            assert abs(position_amplitude(state, -10.0)) < 1e-8

    def test_linear_in_amplitudes(self):
        rng = np.random.default_rng(7)
        x = np.linspace(-4, 4, 17)
        a = oracles.random_pure_amplitudes(rng, 6)
        b = oracles.random_pure_amplitudes(rng, 6)
        mix = 0.3 * a + 0.7j * b
        state = FockState(mix)
        norm = np.linalg.norm(mix)
        expected = (0.3 * position_amplitude(FockState(a), x)
                    + 0.7j * position_amplitude(FockState(b), x)) / norm
        np.testing.assert_allclose(position_amplitude(state, x), expected, atol=1e-12)


class TestMakeStandardState:
    def test_plus_i_superposition(self):
        state = make_standard_state(
            {"kind": "superposition", "terms": [[0, [1, 0]], [1, [0, 1]]]}, cutoff=4)
        np.testing.assert_allclose(
            state.amplitudes, [1 / np.sqrt(2), 1j / np.sqrt(2), 0, 0], atol=1e-15)

    def test_four_level_superposition(self):
        state = make_standard_state(
            {"kind": "superposition", "terms": [[n, 1] for n in range(4)]}, cutoff=4)
        np.testing.assert_allclose(state.amplitudes, np.full(4, 0.5), atol=1e-15)

    def test_coherent_zero_is_vacuum(self):
        state = make_standard_state({"kind": "coherent", "alpha": 0.0}, cutoff=8)
        np.testing.assert_allclose(state.amplitudes[0], 1.0)
        np.testing.assert_allclose(state.amplitudes[1:], 0.0)

    def test_coherent_matches_poisson_weights(self):
        state = coherent_state(1.2, cutoff=24)
        n = np.arange(24)
        expected = np.exp(-0.72) * 1.2**n / np.sqrt(
            np.array([math.factorial(int(i)) for i in n], dtype=float))
        np.testing.assert_allclose(state.amplitudes.real, expected, atol=1e-12)

    def test_coherent_truncation_warns(self):
        with pytest.warns(TruncationWarning):
            coherent_state(3.0, cutoff=6)

    def test_empty_superposition_rejected(self):
        with pytest.raises(ValueError):
            make_standard_state({"kind": "superposition", "terms": []})

    def test_cutoff_too_small_rejected(self):
        with pytest.raises(ValueError):
            superposition_state([(5, 1.0)], cutoff=4)


class TestDensityMatrix:
    def test_validates_hermiticity(self):
        bad = np.array([[0.5, 0.1], [0.3, 0.5]], dtype=complex)
        with pytest.raises(ValueError, match="Hermitian"):
            DensityMatrix(bad)

    def test_validates_trace(self):
        with pytest.raises(ValueError, match="trace"):
            DensityMatrix(np.eye(2))

    def test_validates_positivity(self):
        bad = np.diag([1.5, -0.5]).astype(complex)
        with pytest.raises(ValueError, match="negative eigenvalue"):
            DensityMatrix(bad)

    def test_depolarize_identity_case(self):
        rho = plus_i_state().density_matrix()
        out = depolarize(rho, 0.0)
        np.testing.assert_allclose(out.entries, rho.entries, atol=1e-15)

    def test_depolarize_half_on_vacuum(self):
        rho = depolarize(FockState(np.array([1.0, 0.0])).density_matrix(), 0.5)
        np.testing.assert_allclose(rho.entries, np.diag([0.75, 0.25]), atol=1e-15)

    def test_depolarize_four_level_purity(self):
        # Direct matrix evaluation of (1-eps) P + eps I/4 for the equal
        # four-level superposition gives purity 0.8575 at eps = 0.1.
        state = superposition_state([(n, 1) for n in range(4)], cutoff=4)
        rho = depolarize(state.density_matrix(), 0.1)
        projector = np.full((4, 4), 0.25)
        direct = 0.9 * projector + 0.1 * np.eye(4) / 4
        assert np.trace(direct @ direct).real == pytest.approx(0.8575, abs=1e-12)
        assert rho.purity() == pytest.approx(0.8575, abs=1e-12)

    def test_depolarize_rejects_bad_eps(self):
        rho = plus_i_state().density_matrix()
        with pytest.raises(ValueError):
            depolarize(rho, 1.5)

    def test_depolarize_preserves_invariants(self):
        rng = np.random.default_rng(3)
        for eps in (0.0, 0.17, 0.5, 1.0):
            for _ in range(5):
                rho = DensityMatrix(oracles.random_density(rng, 5))
                out = depolarize(rho, eps)
                np.testing.assert_allclose(out.entries, out.entries.conj().T, atol=1e-14)
                assert np.trace(out.entries).real == pytest.approx(1.0, abs=1e-12)
                assert np.linalg.eigvalsh(out.entries)[0] >= -1e-10

    def test_position_density_matches_reference(self):
        rng = np.random.default_rng(5)
        rho = DensityMatrix(oracles.random_density(rng, 4))
        x = np.linspace(-5, 5, 41)
        np.testing.assert_allclose(position_density(rho, x),
                                   oracles.density_ref(rho.entries, x), atol=1e-12)


class TestPositionGrid:
    def test_spacing_and_extent(self):
        grid = PositionGrid(-8.0, 8.0, 1024)
        assert grid.dx == pytest.approx(16.0 / 1023)
        assert grid.extent == 8.0
        assert grid.xs.size == 1024

    def test_validation(self):
        with pytest.raises(ValueError):
            PositionGrid(2.0, -2.0, 100)
        with pytest.raises(ValueError):
            PositionGrid(-1.0, 1.0, 1)


class TestJsonDescriptors:
    def test_pure_round_trip(self, tmp_path):
        state = plus_i_state()
        path = tmp_path / "state.json"
        save_state(path, state)
        again = load_state(path)
        assert isinstance(again, FockState)
        np.testing.assert_allclose(again.amplitudes, state.amplitudes, atol=1e-15)

    def test_mixed_round_trip(self, tmp_path):
        rng = np.random.default_rng(9)
        rho = DensityMatrix(oracles.random_density(rng, 3))
        path = tmp_path / "rho.json"
        save_state(path, rho)
        again = load_state(path)
        assert isinstance(again, DensityMatrix)
        np.testing.assert_allclose(again.entries, rho.entries, atol=1e-15)

    def test_schema_shape(self):
        payload = state_to_dict(plus_i_state())
        assert payload["cutoff"] == 2
        assert payload["amplitudes"][1] == [0.0, pytest.approx(1 / np.sqrt(2))]
        round_trip = state_from_dict(json.loads(json.dumps(payload)))
        np.testing.assert_allclose(round_trip.amplitudes,
                                   plus_i_state().amplitudes, atol=1e-15)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pulsegen.spin.operators import (
    apply_crusher,
    build_hamiltonian,
    coherence_orders,
    coherence_spectrum,
    delay_propagator,
    evolve,
    matrix_exponential,
    pulse_generator,
    pulse_propagator,
    single_spin_rotation,
    spin_operator,
)
from pulsegen.utils.objects import SpinSystem
from tests.helpers import random_deviation, random_hermitian

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def unitarity_error(u: np.ndarray) -> float:
    return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])))


class TestSpinOperator:
    def test_single_spin_z(self):
        np.testing.assert_array_equal(spin_operator("z", 1, 1), np.diag([0.5, -0.5]))

    def test_z_padded_with_identity(self):
        np.testing.assert_array_equal(spin_operator("z", 1, 2), np.diag([0.5, 0.5, -0.5, -0.5]))

    def test_x_normalization(self):
        ix = spin_operator("x", 2, 2)
        assert np.trace(ix @ ix).real == pytest.approx(1.0)
        assert abs(np.trace(ix)) < 1e-15

    @pytest.mark.parametrize("axis", ["x", "y", "z"])
    def test_hermitian(self, axis):
        op = spin_operator(axis, 2, 3)
        np.testing.assert_allclose(op, op.conj().T)

    @pytest.mark.parametrize("index", [0, 3])
    def test_index_out_of_range(self, index):
        with pytest.raises(ValueError, match="spin_index"):
            spin_operator("z", index, 2)

    def test_unknown_axis(self):
        with pytest.raises(ValueError, match="axis"):
            spin_operator("w", 1, 2)


class TestHamiltonian:
    def test_uncoupled_pair(self, uncoupled):
        delta = 500.0
        expected = 2 * math.pi * delta * np.diag([0.0, 1.0, -1.0, 0.0])
        np.testing.assert_allclose(build_hamiltonian(uncoupled), expected, atol=1e-9)

    def test_coupled_pair(self):
        delta, j = 500.0, 50.0
        h = build_hamiltonian(SpinSystem.two_spin(delta, j))
        expected = np.diag(
            [
                math.pi * j / 2,
                2 * math.pi * delta - math.pi * j / 2,
                -2 * math.pi * delta - math.pi * j / 2,
                math.pi * j / 2,
            ]
        )
        np.testing.assert_allclose(h, expected, atol=1e-9)

    def test_hermitian(self, system):
        h = build_hamiltonian(system)
        assert np.linalg.norm(h - h.conj().T) < 1e-12


class TestMatrixExponential:
    def test_zero_time_is_identity(self, system):
        u = matrix_exponential(build_hamiltonian(system), 0.0)
        np.testing.assert_allclose(u, np.eye(4), atol=1e-15)

    def test_diagonal_generator(self, uncoupled):
        t = 1.3e-4
        u = matrix_exponential(build_hamiltonian(uncoupled), t)
        phase = 2 * math.pi * 500.0 * t
        np.testing.assert_allclose(
            np.diag(u), [1.0, np.exp(-1j * phase), np.exp(1j * phase), 1.0], atol=1e-12
        )

    def test_eigh_and_pade_agree(self):
        rng = np.random.default_rng(2024)
        for _ in range(100):
            h = random_hermitian(rng)
            t = rng.uniform(0.0, 2.0)
            diff = matrix_exponential(h, t, "eigh") - matrix_exponential(h, t, "pade")
            assert np.linalg.norm(diff) < 1e-10

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError, match="Hermitian"):
            matrix_exponential(np.array([[0.0, 1.0], [0.0, 0.0]]), 1.0)

    def test_rejects_unknown_method(self):
        with pytest.raises(ValueError, match="method"):
            matrix_exponential(np.eye(2), 1.0, "taylor")


class TestPulsePropagator:
    def test_zero_flip_is_identity(self, system):
        np.testing.assert_allclose(pulse_propagator(system, [0.0], [1.2]), np.eye(4), atol=1e-15)

    def test_pi_pulse_on_one_spin(self, single_spin):
        u = pulse_propagator(single_spin, [math.pi], [0.0])
        np.testing.assert_allclose(u, -1j * 2 * spin_operator("x", 1, 1), atol=1e-15)

    def test_opposite_phases_cancel(self, system):
        phi = 0.7
        first = pulse_propagator(system, [math.pi / 2], [phi - math.pi / 2])
        second = pulse_propagator(system, [math.pi / 2], [phi + math.pi / 2])
        np.testing.assert_allclose(second @ first, np.eye(4), atol=1e-14)

    @settings(max_examples=50, deadline=None)
    @given(
        theta=st.floats(0.0, 2 * math.pi),
        phi=st.floats(0.0, 2 * math.pi),
    )
    def test_matches_exponential_of_generator(self, theta, phi):
        system = SpinSystem.two_spin(500.0, 5.0)
        expected = matrix_exponential(pulse_generator(system, [theta], [phi]), 1.0)
        np.testing.assert_allclose(pulse_propagator(system, [theta], [phi]), expected, atol=1e-12)

    def test_channel_is_tensor_product_of_rotations(self, system):
        r = single_spin_rotation(1.1, 0.4)
        np.testing.assert_allclose(pulse_propagator(system, [1.1], [0.4]), np.kron(r, r), atol=1e-15)

    def test_separate_channels(self):
        system = SpinSystem.two_spin(500.0, 5.0, separate_channels=True)
        u = pulse_propagator(system, [math.pi / 2, 0.3], [0.0, 1.0])
        expected = np.kron(single_spin_rotation(math.pi / 2, 0.0), single_spin_rotation(0.3, 1.0))
        np.testing.assert_allclose(u, expected, atol=1e-15)

    def test_channel_mismatch(self, system):
        with pytest.raises(ValueError, match="flips"):
            pulse_propagator(system, [0.1, 0.2], [0.0, 0.0])

    @settings(max_examples=50, deadline=None)
    @given(seed=seeds)
    def test_unitary(self, seed):
        rng = np.random.default_rng(seed)
        system = SpinSystem.two_spin(500.0, 5.0, separate_channels=True)
        u = pulse_propagator(system, list(rng.uniform(0, 7, 2)), list(rng.uniform(0, 7, 2)))
        assert unitarity_error(u) < 1e-10


class TestDelayPropagator:
    def test_zero_delay(self, system):
        np.testing.assert_array_equal(delay_propagator(system, 0.0), np.eye(4))

    def test_quarter_period_gives_relative_phase_pi(self, uncoupled):
        u = delay_propagator(uncoupled, 1 / (4 * 500.0))
        assert u[1, 1] / u[2, 2] == pytest.approx(-1.0)

    def test_eighth_period_gives_relative_phase_half_pi(self, uncoupled):
        u = delay_propagator(uncoupled, 1 / (8 * 500.0))
        assert u[1, 1] / u[2, 2] == pytest.approx(-1j)

    def test_commutes_with_hamiltonian(self, system):
        h = build_hamiltonian(system)
        u = delay_propagator(system, 3.7e-3)
        assert np.linalg.norm(u @ h - h @ u) < 1e-9
        assert unitarity_error(u) < 1e-10

    def test_negative_delay(self, system):
        with pytest.raises(ValueError, match="d"):
            delay_propagator(system, -1e-6)


class TestCrusher:
    def test_coherence_orders(self):
        orders = coherence_orders(2)
        assert orders[0, 3] == 2
        assert orders[3, 0] == -2
        assert orders[1, 2] == 0
        assert orders[0, 1] == 1
        np.testing.assert_array_equal(np.diag(orders), 0)

    def test_populations_survive(self):
        rho = np.diag([1.5, -0.5, -0.5, -0.5]).astype(complex)
        np.testing.assert_array_equal(apply_crusher(rho), rho)

    def test_single_quantum_removed(self):
        np.testing.assert_array_equal(apply_crusher(spin_operator("x", 1, 2)), np.zeros((4, 4)))

    def test_zero_quantum_survives(self):
        zq = spin_operator("x", 1, 2) @ spin_operator("x", 2, 2) + spin_operator(
            "y", 1, 2
        ) @ spin_operator("y", 2, 2)
        np.testing.assert_array_equal(apply_crusher(zq), zq)

    @settings(max_examples=50, deadline=None)
    @given(seed=seeds, scale=st.floats(-3.0, 3.0))
    def test_channel_properties(self, seed, scale):
        rng = np.random.default_rng(seed)
        a = random_deviation(rng)
        b = random_deviation(rng)
        crushed = apply_crusher(a)
        np.testing.assert_allclose(apply_crusher(crushed), crushed, atol=1e-12)
        np.testing.assert_allclose(
            apply_crusher(a + scale * b), crushed + scale * apply_crusher(b), atol=1e-12
        )
        np.testing.assert_allclose(crushed, crushed.conj().T, atol=1e-12)
        assert np.linalg.norm(crushed) <= np.linalg.norm(a) + 1e-12

    def test_spectrum_of_transverse_magnetization(self):
        spectrum = coherence_spectrum(spin_operator("x", 1, 2))
        assert spectrum[0] == 0.0
        assert spectrum[1] > 0.0 and spectrum[-1] > 0.0
        assert spectrum[2] == 0.0


@settings(max_examples=50, deadline=None)
@given(seed=seeds)
def test_evolution_preserves_trace_and_hermiticity(seed):
    rng = np.random.default_rng(seed)
    rho = random_deviation(rng)
    u = matrix_exponential(random_hermitian(rng), 1.0)
    out = evolve(rho, u)
    assert abs(np.trace(out)) < 1e-12
    assert np.linalg.norm(out - out.conj().T) < 1e-12

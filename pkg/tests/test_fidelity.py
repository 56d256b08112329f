import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pulsegen.catalog.targets import cnot_matrix, target_state
from pulsegen.spin.fidelity import (
    diagonal_populations,
    operator_fidelity,
    state_fidelity,
    transfer_efficiency,
)
from pulsegen.spin.operators import matrix_exponential, spin_operator
from pulsegen.utils.errors import ZeroNormError
from pulsegen.utils.objects import StateLabel
from tests.helpers import random_deviation, random_hermitian

seeds = st.integers(min_value=0, max_value=2**32 - 1)

THERMAL = target_state(StateLabel.THERMAL)
PPS00 = target_state(StateLabel.PPS00)


class TestOperatorFidelity:
    @settings(max_examples=50, deadline=None)
    @given(seed=seeds, alpha=st.floats(0.0, 2 * math.pi))
    def test_global_phase_invariance(self, seed, alpha):
        rng = np.random.default_rng(seed)
        u = matrix_exponential(random_hermitian(rng), 1.0)
        v = matrix_exponential(random_hermitian(rng), 1.0)
        assert operator_fidelity(u, u) == pytest.approx(1.0, abs=1e-12)
        assert operator_fidelity(np.exp(1j * alpha) * u, u) == pytest.approx(1.0, abs=1e-12)
        assert operator_fidelity(u, v) == pytest.approx(operator_fidelity(v, u), abs=1e-12)
        assert 0.0 <= operator_fidelity(u, v) <= 1.0

    def test_cnot_against_identity(self):
        assert operator_fidelity(np.eye(4), cnot_matrix(1, 2, False, 2)) == pytest.approx(0.5)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            operator_fidelity(np.eye(2), np.eye(4))


class TestStateFidelity:
    def test_self_overlap(self):
        assert state_fidelity(PPS00, PPS00) == pytest.approx(1.0, abs=1e-12)

    def test_anti_aligned(self):
        assert state_fidelity(PPS00, -PPS00) == pytest.approx(-1.0, abs=1e-12)

    def test_thermal_to_pps(self):
        assert np.linalg.norm(THERMAL) ** 2 == pytest.approx(2.0)
        assert np.linalg.norm(PPS00) ** 2 == pytest.approx(3.0)
        assert abs(state_fidelity(THERMAL, PPS00) - 2 / math.sqrt(6)) < 1e-12

    @settings(max_examples=50, deadline=None)
    @given(seed=seeds, a=st.floats(1e-3, 1e3), b=st.floats(1e-3, 1e3))
    def test_scale_invariance_and_symmetry(self, seed, a, b):
        rng = np.random.default_rng(seed)
        x = random_deviation(rng)
        y = random_deviation(rng)
        f = state_fidelity(x, y)
        assert state_fidelity(a * x, b * y) == pytest.approx(f, abs=1e-12)
        assert state_fidelity(y, x) == pytest.approx(f, abs=1e-12)
        assert -1.0 <= f <= 1.0

    def test_zero_norm(self):
        with pytest.raises(ZeroNormError):
            state_fidelity(np.zeros((4, 4)), PPS00)
        with pytest.raises(ZeroNormError):
            state_fidelity(PPS00, np.zeros((4, 4)))


class TestPopulations:
    def test_thermal(self):
        np.testing.assert_allclose(diagonal_populations(THERMAL), [1.0, 0.0, 0.0, -1.0])

    def test_pps(self):
        np.testing.assert_allclose(diagonal_populations(PPS00), [1.5, -0.5, -0.5, -0.5])

    def test_transverse(self):
        np.testing.assert_allclose(diagonal_populations(spin_operator("x", 1, 2)), np.zeros(4))


def test_transfer_efficiency():
    assert transfer_efficiency(0.5 * THERMAL, THERMAL) == pytest.approx(0.5)
    with pytest.raises(ZeroNormError):
        transfer_efficiency(THERMAL, np.zeros((4, 4)))

"""
Full-size GA runs against the quoted fidelity thresholds. Deselected by
default; run with `pytest -m slow`.
"""
import numpy as np
import pytest

from pulsegen.catalog.problems import catalog_problem, default_system
from pulsegen.catalog.targets import singlet_readout, target_state
from pulsegen.ga.engine import optimize
from pulsegen.ga.simulator import simulate_sequence
from pulsegen.spin.fidelity import diagonal_populations
from pulsegen.spin.operators import coherence_orders
from pulsegen.utils.objects import GAConfig, StateLabel

pytestmark = pytest.mark.slow

DELTA = 500.0
CNOTS = ["cnot12", "cnot1bar2", "cnot21", "cnot2bar1"]
BELLS = ["bell-psi-plus", "bell-psi-minus", "bell-phi-plus", "bell-phi-minus"]


@pytest.mark.parametrize("name", CNOTS)
@pytest.mark.parametrize("ratio, threshold", [(0.01, 0.9999), (0.1, 0.9984)])
def test_cnot(name, ratio, threshold):
    problem = catalog_problem(name, default_system(DELTA, ratio * DELTA))
    config = GAConfig(rng_seed=7, cutoff=threshold)
    assert optimize(problem, config).best_fitness >= threshold


@pytest.mark.parametrize("ratio", [0.01, 0.05, 0.1])
def test_pps(ratio):
    problem = catalog_problem("pps00", default_system(DELTA, ratio * DELTA))
    result = optimize(problem, GAConfig(rng_seed=7, cutoff=0.999))
    assert result.best_fitness >= 0.999

    rho = simulate_sequence(result.best, problem)
    populations = diagonal_populations(rho)
    # compare shapes: scale the largest population onto 3/2
    np.testing.assert_allclose(populations * 1.5 / populations[0], [1.5, -0.5, -0.5, -0.5], atol=1e-3)


@pytest.mark.parametrize("name", BELLS)
def test_bell(name):
    problem = catalog_problem(name, default_system(DELTA, 0.1 * DELTA))
    result = optimize(problem, GAConfig(rng_seed=7))
    assert result.best_fitness >= 0.99


def test_singlet_readout_of_optimized_state():
    problem = catalog_problem("bell-phi-minus", default_system(DELTA, 0.1 * DELTA), final_crusher=True)
    result = optimize(problem, GAConfig(rng_seed=7))
    out = singlet_readout(simulate_sequence(result.best, problem))
    orders = np.abs(coherence_orders(2))
    single = np.linalg.norm(out[orders == 1]) ** 2 / np.linalg.norm(out) ** 2
    ideal = singlet_readout(target_state(StateLabel.PHI_MINUS))
    ideal_single = np.linalg.norm(ideal[orders == 1]) ** 2 / np.linalg.norm(ideal) ** 2
    assert single == pytest.approx(ideal_single, abs=0.02)

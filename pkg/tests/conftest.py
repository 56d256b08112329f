import math

import pytest

from pulsegen.utils.objects import GAConfig, SpinSystem


@pytest.fixture
def system() -> SpinSystem:
    return SpinSystem.two_spin(500.0, 5.0)


@pytest.fixture
def uncoupled() -> SpinSystem:
    return SpinSystem.two_spin(500.0, 0.0)


@pytest.fixture
def single_spin() -> SpinSystem:
    return SpinSystem(shifts=[0.0], j_coupling=[[0.0]], channels=[[1]])


@pytest.fixture
def small_config() -> GAConfig:
    return GAConfig(
        population_size=40,
        generations=200,
        rng_seed=11,
        restarts=1,
        polish_generations=0,
        angle_sigma=0.2 * math.pi,
    )

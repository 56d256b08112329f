import numpy as np


def random_hermitian(rng: np.random.Generator, dim: int = 4) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (a + a.conj().T) / 2


def random_deviation(rng: np.random.Generator, dim: int = 4) -> np.ndarray:
    h = random_hermitian(rng, dim)
    return h - np.trace(h) / dim * np.eye(dim)

"""
Product operators, the weak-coupling Hamiltonian and the propagators built from it.

All matrices live in the Zeeman product basis |0...0>, |0...1>, ..., spin 1 being
the leftmost factor and |0> the Iz = +1/2 state.
"""
import logging
import math

import numpy as np
import scipy.linalg as la

from pulsegen.utils.objects import SpinSystem

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-10

_HALF_PAULI = {
    "x": np.array([[0.0, 0.5], [0.5, 0.0]], dtype=np.complex128),
    "y": np.array([[0.0, -0.5j], [0.5j, 0.0]], dtype=np.complex128),
    "z": np.array([[0.5, 0.0], [0.0, -0.5]], dtype=np.complex128),
}


def n_spins_for_dim(dim: int) -> int:
    n = int(round(math.log2(dim))) if dim > 0 else -1
    if n < 1 or 2**n != dim:
        raise ValueError(f"dim: {dim} is not a power of two")
    return n


def spin_operator(axis: str, spin_index: int, n_spins: int) -> np.ndarray:
    """I_axis of one spin, padded with identities on every other spin."""
    if axis not in _HALF_PAULI:
        raise ValueError(f"axis: expected 'x', 'y' or 'z', got {axis!r}")
    if n_spins < 1:
        raise ValueError(f"n_spins: must be >= 1, got {n_spins}")
    if not 1 <= spin_index <= n_spins:
        raise ValueError(f"spin_index: {spin_index} outside 1..{n_spins}")
    op = np.ones((1, 1), dtype=np.complex128)
    for k in range(1, n_spins + 1):
        factor = _HALF_PAULI[axis] if k == spin_index else np.eye(2, dtype=np.complex128)
        op = np.kron(op, factor)
    return op


def zeeman_quantum_numbers(n_spins: int) -> np.ndarray:
    """m_k (+1/2 or -1/2) of every basis state, shape (2**n, n)."""
    states = np.arange(2**n_spins)
    bits = (states[:, None] >> (n_spins - 1 - np.arange(n_spins))[None, :]) & 1
    return 0.5 - bits


def coherence_orders(n_spins: int) -> np.ndarray:
    """Total-Iz difference between bra and ket for every matrix element."""
    total = zeeman_quantum_numbers(n_spins).sum(axis=1)
    return np.rint(total[:, None] - total[None, :]).astype(int)


def hamiltonian_diagonal(system: SpinSystem) -> np.ndarray:
    """Eigenvalues (rad/s) of the weak-coupling Hamiltonian in basis order."""
    m = zeeman_quantum_numbers(system.n_spins)
    shifts = np.asarray(system.shifts, dtype=float)
    j = np.asarray(system.j_coupling, dtype=float)
    diag = 2.0 * math.pi * (m @ shifts)
    # j is symmetric with a zero diagonal, so half the full quadratic form is the k<l sum
    diag += math.pi * np.einsum("bk,kl,bl->b", m, j, m)
    return diag


def build_hamiltonian(system: SpinSystem) -> np.ndarray:
    """H = sum_k 2π shift_k Iz^k + sum_{k<l} 2π J_kl Iz^k Iz^l, in rad/s."""
    return np.diag(hamiltonian_diagonal(system)).astype(np.complex128)


def is_hermitian(op: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    scale = max(1.0, float(np.linalg.norm(op)))
    return bool(np.linalg.norm(op - op.conj().T) < tol * scale)


def matrix_exponential(H: np.ndarray, t: float, method: str = "eigh") -> np.ndarray:
    """
    Propagator exp(-iHt) of a Hermitian generator.

    Args:
        H: Hermitian matrix in rad/s
        t: evolution time in seconds
        method: "eigh" for spectral decomposition, "pade" for scipy's
            scaling-and-squaring Padé expm

    Returns:
        The unitary exp(-iHt)
    """
    H = np.asarray(H, dtype=np.complex128)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("H: must be a square matrix")
    if not is_hermitian(H):
        raise ValueError("H: matrix_exponential expects a Hermitian generator")

    if method == "eigh":
        eig_val, eig_vec = la.eigh(H)
        return (eig_vec * np.exp(-1j * eig_val * t)) @ eig_vec.conj().T
    if method == "pade":
        return la.expm(-1j * t * H)
    raise ValueError(f"method: unknown matrix exponential method {method!r}")


def single_spin_rotation(theta: float, phi: float) -> np.ndarray:
    """exp(-iθ(cosφ Ix + sinφ Iy)) for one spin-1/2."""
    c = math.cos(theta / 2.0)
    s = math.sin(theta / 2.0)
    return np.array(
        [
            [c, -1j * s * complex(math.cos(phi), -math.sin(phi))],
            [-1j * s * complex(math.cos(phi), math.sin(phi)), c],
        ],
        dtype=np.complex128,
    )


def channel_pulse(channel_of_spin: list[int], flips, phases) -> np.ndarray:
    rotations = [single_spin_rotation(t, p) for t, p in zip(flips, phases)]
    op = np.ones((1, 1), dtype=np.complex128)
    for channel in channel_of_spin:
        op = np.kron(op, rotations[channel])
    return op


def pulse_propagator(system: SpinSystem, flips, phases) -> np.ndarray:
    """
    Instantaneous hard pulse: every spin of a channel gets that channel's (θ, φ).
    Drift is ignored for the duration of the pulse.
    """
    if len(flips) != system.n_channels or len(phases) != system.n_channels:
        raise ValueError(
            f"flips: expected {system.n_channels} (flip, phase) pairs, "
            f"got {len(flips)} flips and {len(phases)} phases"
        )
    return channel_pulse(system.channel_of_spin(), flips, phases)


def pulse_generator(system: SpinSystem, flips, phases) -> np.ndarray:
    """Σ_k θ_ch(k)(cosφ_ch(k) Ix^k + sinφ_ch(k) Iy^k), the exponent of pulse_propagator."""
    n = system.n_spins
    gen = np.zeros((2**n, 2**n), dtype=np.complex128)
    for k, channel in enumerate(system.channel_of_spin(), start=1):
        theta, phi = flips[channel], phases[channel]
        gen += theta * (
            math.cos(phi) * spin_operator("x", k, n) + math.sin(phi) * spin_operator("y", k, n)
        )
    return gen


def delay_propagator(system: SpinSystem, d: float) -> np.ndarray:
    """Free evolution exp(-iHd); diagonal because H only holds Iz terms."""
    if d < 0:
        raise ValueError(f"d: delay must be >= 0, got {d}")
    return np.diag(np.exp(-1j * hamiltonian_diagonal(system) * d))


def evolve(rho: np.ndarray, U: np.ndarray) -> np.ndarray:
    return U @ rho @ U.conj().T


def apply_crusher(rho: np.ndarray) -> np.ndarray:
    """Ideal gradient: drop every element of nonzero coherence order."""
    rho = np.asarray(rho, dtype=np.complex128)
    keep = coherence_orders(n_spins_for_dim(rho.shape[0])) == 0
    return np.where(keep, rho, 0.0)


def coherence_spectrum(rho: np.ndarray) -> dict[int, float]:
    """Frobenius norm carried by each coherence order."""
    rho = np.asarray(rho, dtype=np.complex128)
    orders = coherence_orders(n_spins_for_dim(rho.shape[0]))
    return {
        int(p): float(np.linalg.norm(rho[orders == p]))
        for p in np.unique(orders)
    }

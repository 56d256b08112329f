"""
Target gates and states for two weakly coupled spins, plus the tabulated
parameters quoted for the experimental sequences.
"""
import logging
import math
from typing import NamedTuple, Optional

import numpy as np

from pulsegen.spin.operators import matrix_exponential, spin_operator
from pulsegen.utils.objects import GateLabel, SpinSystem, StateLabel

logger = logging.getLogger(__name__)


class BellRow(NamedTuple):
    phi1: float
    phi2: float
    phi3: float
    d1: float  # units of 1/delta
    d2: float  # units of 1/delta


# (theta, phi) quoted for the four controlled-NOT gates
CNOT_TABLE: dict[str, tuple[float, float]] = {
    "cnot12": (math.pi / 4, math.pi / 2),
    "cnot1bar2": (math.pi / 4, 0.0),
    "cnot21": (3 * math.pi / 4, 0.0),
    "cnot2bar1": (3 * math.pi / 4, math.pi / 2),
}

BELL_TABLE: dict[StateLabel, BellRow] = {
    StateLabel.PSI_PLUS: BellRow(3 * math.pi / 4, 9 * math.pi / 8, 3 * math.pi / 4, 1 / 16, 0.0),
    StateLabel.PSI_MINUS: BellRow(3 * math.pi / 4, 9 * math.pi / 8, math.pi / 4, 1 / 16, 0.0),
    StateLabel.PHI_PLUS: BellRow(0.0, 5 * math.pi / 8, 3 * math.pi / 4, 9 / 48, 9 / 8),
    StateLabel.PHI_MINUS: BellRow(0.0, 5 * math.pi / 8, math.pi / 4, 9 / 48, 9 / 8),
}

# amplitudes on |00>, |01>, |10>, |11>
_BELL_VECTORS: dict[StateLabel, tuple[float, float, float, float]] = {
    StateLabel.PSI_PLUS: (1.0, 0.0, 0.0, 1.0),
    StateLabel.PSI_MINUS: (1.0, 0.0, 0.0, -1.0),
    StateLabel.PHI_PLUS: (0.0, 1.0, 1.0, 0.0),
    StateLabel.PHI_MINUS: (0.0, 1.0, -1.0, 0.0),
}

_PPS_BITS: dict[StateLabel, tuple[int, int]] = {
    StateLabel.PPS00: (0, 0),
    StateLabel.PPS01: (0, 1),
    StateLabel.PPS10: (1, 0),
    StateLabel.PPS11: (1, 1),
}


def bell_table_delays(label: StateLabel, delta: float) -> tuple[float, float]:
    """Tabulated (d1, d2) in seconds for a chemical shift offset delta in Hz."""
    if label not in BELL_TABLE:
        raise ValueError(f"label: {label!r} is not a Bell state")
    if delta <= 0:
        raise ValueError(f"delta: must be > 0, got {delta}")
    row = BELL_TABLE[label]
    return row.d1 / delta, row.d2 / delta


def sqr_generator(spin: int, theta: float, phi: float, n_spins: int) -> np.ndarray:
    return theta * (
        math.cos(phi) * spin_operator("x", spin, n_spins)
        + math.sin(phi) * spin_operator("y", spin, n_spins)
    )


def cnot_matrix(control: int, target: int, negated: bool, n_spins: int) -> np.ndarray:
    dim = 2**n_spins
    active = 0 if negated else 1
    out = np.zeros((dim, dim), dtype=np.complex128)
    for state in range(dim):
        control_bit = (state >> (n_spins - control)) & 1
        image = state ^ (1 << (n_spins - target)) if control_bit == active else state
        out[image, state] = 1.0
    return out


def target_unitary(label: GateLabel, n_spins: int = 2) -> np.ndarray:
    """Ideal gate: a selective rotation of one spin, or a permutation for CNOT."""
    if label.kind == "sqr":
        if label.spin > n_spins:
            raise ValueError(f"spin: {label.spin} outside 1..{n_spins}")
        return matrix_exponential(sqr_generator(label.spin, label.theta, label.phi, n_spins), 1.0)
    if max(label.control, label.target) > n_spins:
        raise ValueError(f"control: CNOT spins must lie in 1..{n_spins}")
    return cnot_matrix(label.control, label.target, label.negated, n_spins)


def thermal_deviation() -> np.ndarray:
    return spin_operator("z", 1, 2) + spin_operator("z", 2, 2)


def pps_deviation(bits: tuple[int, int]) -> np.ndarray:
    """s_a Iz1 + s_b Iz2 + 2 s_a s_b Iz1 Iz2 with s = +1 for |0> and -1 for |1>."""
    s_a, s_b = (1 - 2 * b for b in bits)
    iz1 = spin_operator("z", 1, 2)
    iz2 = spin_operator("z", 2, 2)
    return s_a * iz1 + s_b * iz2 + 2 * s_a * s_b * (iz1 @ iz2)


def pure_state_deviation(amplitudes) -> np.ndarray:
    vec = np.asarray(amplitudes, dtype=np.complex128)
    vec = vec / np.linalg.norm(vec)
    return np.outer(vec, vec.conj()) - np.eye(vec.size) / vec.size


def target_state(label: StateLabel) -> np.ndarray:
    """Traceless deviation for a two-spin state label."""
    label = StateLabel(label)
    if label is StateLabel.THERMAL:
        return thermal_deviation()
    if label in _PPS_BITS:
        return pps_deviation(_PPS_BITS[label])
    return pure_state_deviation(_BELL_VECTORS[label])


def readout_unitary() -> np.ndarray:
    """exp(-i π/2 (Ix1 + Ix2)) exp(-i π/4 (Iz1 - Iz2))."""
    ix = spin_operator("x", 1, 2) + spin_operator("x", 2, 2)
    iz = spin_operator("z", 1, 2) - spin_operator("z", 2, 2)
    return matrix_exponential(ix, math.pi / 2) @ matrix_exponential(iz, math.pi / 4)


def singlet_readout(rho: np.ndarray, system: Optional[SpinSystem] = None) -> np.ndarray:
    """Turn the unobservable singlet deviation into antiphase single-quantum coherence."""
    if system is not None and system.n_spins != 2:
        raise ValueError(f"system: readout is defined for two spins, got {system.n_spins}")
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.shape != (4, 4):
        raise ValueError(f"rho: readout needs a two-spin deviation, got shape {rho.shape}")
    u = readout_unitary()
    return u @ rho @ u.conj().T

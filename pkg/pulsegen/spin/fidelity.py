"""
Fidelity functionals for operator and state-to-state objectives.
"""
import numpy as np

from pulsegen.utils.errors import ZeroNormError

ZERO_NORM = 1e-12


def operator_fidelity(U_pul: np.ndarray, U_tar: np.ndarray) -> float:
    """
    |Tr(U_tar† U_pul)| / 2^n.

    Equals 1 only when the two unitaries agree up to a global phase.
    """
    U_pul = np.asarray(U_pul)
    U_tar = np.asarray(U_tar)
    if U_pul.shape != U_tar.shape or U_pul.ndim != 2:
        raise ValueError(f"U_tar: shape {U_tar.shape} does not match U_pul shape {U_pul.shape}")
    overlap = abs(np.vdot(U_tar, U_pul)) / U_pul.shape[0]
    return float(min(overlap, 1.0))


def state_fidelity(rho_f: np.ndarray, rho_tar: np.ndarray) -> float:
    """
    Normalized overlap Re Tr(ρ_f ρ_tar†) / (‖ρ_f‖ ‖ρ_tar‖) of two deviations.

    Raises:
        ZeroNormError: either deviation has vanished, e.g. after a crusher
    """
    rho_f = np.asarray(rho_f)
    rho_tar = np.asarray(rho_tar)
    if rho_f.shape != rho_tar.shape:
        raise ValueError(f"rho_tar: shape {rho_tar.shape} does not match rho_f shape {rho_f.shape}")
    norm_f = float(np.linalg.norm(rho_f))
    norm_tar = float(np.linalg.norm(rho_tar))
    if norm_f < ZERO_NORM:
        raise ZeroNormError("rho_f: deviation has zero norm")
    if norm_tar < ZERO_NORM:
        raise ZeroNormError("rho_tar: deviation has zero norm")
    overlap = np.vdot(rho_tar, rho_f).real / (norm_f * norm_tar)
    return float(np.clip(overlap, -1.0, 1.0))


def diagonal_populations(rho: np.ndarray) -> np.ndarray:
    """Real diagonal in basis order |00>, |01>, |10>, |11>."""
    return np.real(np.diag(np.asarray(rho))).copy()


def transfer_efficiency(rho_f: np.ndarray, rho_in: np.ndarray) -> float:
    """Fraction ‖ρ_f‖/‖ρ_in‖ of the starting deviation that survived the sequence."""
    norm_in = float(np.linalg.norm(rho_in))
    if norm_in < ZERO_NORM:
        raise ZeroNormError("rho_in: deviation has zero norm")
    return float(np.linalg.norm(rho_f)) / norm_in

"""
Selective single-spin rotations built from non-selective hard pulses.

The sequence is (π/2)_φ1, delay, (π/2)_φ2, (θ/2)_φ. The two π/2 pulses have
opposite phases, so the delay between them acts as a rotation about an axis
in the transverse plane whose sense differs between the spins; the last pulse
then adds θ/2 on one spin and cancels it on the other.
"""
import logging
import math
from typing import Optional

import numpy as np
from pydantic import BaseModel
from scipy.optimize import minimize_scalar

from pulsegen.catalog.targets import target_unitary
from pulsegen.ga.simulator import evaluate_fitness
from pulsegen.utils.errors import SolverError
from pulsegen.utils.objects import (
    GateLabel,
    OperatorTarget,
    Problem,
    PulseGene,
    PulseSequence,
    SpinSystem,
)

logger = logging.getLogger(__name__)

SQR_THRESHOLD = 0.999
GRID_POINTS = 64
DELAY_SLOTS = (0, 1, 2)


class SqrSolution(BaseModel):
    sequence: PulseSequence
    delay: float
    slot: int
    fidelity: float


def sqr_phases(spin: int, phi: float) -> tuple[float, float]:
    """(φ1, φ2) of the two π/2 pulses that select `spin`."""
    if spin == 1:
        return phi - math.pi / 2, phi + math.pi / 2
    if spin == 2:
        return phi + math.pi / 2, phi - math.pi / 2
    raise ValueError(f"spin: selective rotation is defined for spin 1 or 2, got {spin}")


def sqr_template(
    spin: int,
    theta: float,
    phi: float,
    delay: float,
    slot: int = 0,
    n_channels: int = 1,
) -> PulseSequence:
    """Three-pulse sequence with its single delay placed after pulse `slot`."""
    if slot not in DELAY_SLOTS:
        raise ValueError(f"slot: must be one of {DELAY_SLOTS}, got {slot}")
    phi1, phi2 = sqr_phases(spin, phi)
    pulses = [(math.pi / 2, phi1), (math.pi / 2, phi2), (theta / 2, phi)]
    genes = [
        PulseGene(
            flips=[flip] * n_channels,
            phases=[phase] * n_channels,
            delay=delay if k == slot else 0.0,
        )
        for k, (flip, phase) in enumerate(pulses)
    ]
    return PulseSequence(n_channels=n_channels, genes=genes)


def analytic_delay(theta: float, system: SpinSystem) -> float:
    """Delay that rotates the spins by ±θ/2 relative to each other at J = 0."""
    spread = system.max_shift_difference()
    if spread == 0.0:
        raise ValueError("system: spins with equal shifts cannot be addressed selectively")
    period = 2.0 / spread
    return (theta / (2.0 * math.pi * spread)) % period


def sqr_problem(spin: int, theta: float, phi: float, system: SpinSystem) -> Problem:
    label = GateLabel.sqr(spin, theta, phi)
    return Problem(
        name=label.name,
        system=system,
        objective=OperatorTarget(unitary=target_unitary(label, system.n_spins)),
    )


def solve_slot(spin: int, theta: float, phi: float, system: SpinSystem, slot: int) -> tuple[float, float]:
    """Best (delay, fidelity) for one delay position."""
    problem = sqr_problem(spin, theta, phi, system)
    period = 2.0 / system.max_shift_difference()

    def fidelity(d: float) -> float:
        seq = sqr_template(spin, theta, phi, max(d, 0.0), slot, system.n_channels)
        return evaluate_fitness(seq, problem)

    grid = np.linspace(0.0, period, GRID_POINTS + 1)
    candidates = list(grid) + [analytic_delay(theta, system)]
    scores = [fidelity(d) for d in candidates]
    best = int(np.argmax(scores))
    best_delay, best_fidelity = float(candidates[best]), float(scores[best])

    step = period / GRID_POINTS
    lower, upper = max(0.0, best_delay - step), min(period, best_delay + step)
    refined = minimize_scalar(
        lambda d: -fidelity(d), bounds=(lower, upper), method="bounded", options={"xatol": 1e-12}
    )
    if refined.success and -refined.fun > best_fidelity:
        best_delay, best_fidelity = float(refined.x), float(-refined.fun)
    return best_delay, best_fidelity


def solve_sqr(
    spin: int,
    theta: float,
    phi: float,
    system: SpinSystem,
    slots: Optional[tuple[int, ...]] = None,
) -> SqrSolution:
    """
    Solve the free delay of the selective-rotation sequence.

    Every delay position in `slots` is searched; the best one wins, ties going
    to the earlier slot.

    Raises:
        SolverError: fidelity stays below 0.999 on an uncoupled system
    """
    GateLabel.sqr(spin, theta, phi)
    best: Optional[SqrSolution] = None
    for slot in slots or DELAY_SLOTS:
        delay, fidelity = solve_slot(spin, theta, phi, system, slot)
        logger.debug(f"SQR spin {spin} theta {theta:.4f}: slot {slot} delay {delay:.6e} F={fidelity:.6f}")
        if best is None or fidelity > best.fidelity:
            best = SqrSolution(
                sequence=sqr_template(spin, theta, phi, delay, slot, system.n_channels),
                delay=delay,
                slot=slot,
                fidelity=fidelity,
            )

    assert best is not None
    if best.fidelity < SQR_THRESHOLD:
        if system.max_coupling() == 0.0:
            raise SolverError(
                f"selective rotation of spin {spin} reached only F={best.fidelity:.6f} at J = 0",
                fidelity=best.fidelity,
            )
        logger.warning(
            f"selective rotation of spin {spin} (theta={theta:.4f}) reached F={best.fidelity:.6f} "
            f"with J = {system.max_coupling()} Hz"
        )
    return best


def sqr_sequence(spin: int, theta: float, phi: float, system: SpinSystem) -> PulseSequence:
    """Three hard pulses and one solved delay implementing SQR(spin, θ, φ)."""
    return solve_sqr(spin, theta, phi, system).sequence

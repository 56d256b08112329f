"""
Sequence simulation and fitness for the GA.

A sequence is applied gene by gene: the hard pulse, then the free delay, then
the crusher when the gene carries one. Populations are simulated as stacked
arrays so a whole generation is evaluated with batched matrix products.
"""
import logging
from typing import NamedTuple, Optional

import numpy as np

from pulsegen.spin.fidelity import ZERO_NORM, operator_fidelity, state_fidelity
from pulsegen.spin.operators import coherence_orders, hamiltonian_diagonal
from pulsegen.utils.errors import ZeroNormError
from pulsegen.utils.objects import PulseGene, PulseSequence, Problem

logger = logging.getLogger(__name__)

CRUSHED_FITNESS = -1.0


class Population(NamedTuple):
    """Chromosomes of P individuals with m genes on C channels."""

    flips: np.ndarray  # (P, m, C)
    phases: np.ndarray  # (P, m, C)
    delays: np.ndarray  # (P, m)
    crushers: np.ndarray  # (P, m) bool

    @property
    def size(self) -> int:
        return self.delays.shape[0]

    @property
    def m(self) -> int:
        return self.delays.shape[1]

    def take(self, index) -> "Population":
        return Population(
            self.flips[index], self.phases[index], self.delays[index], self.crushers[index]
        )

    def copy(self) -> "Population":
        return Population(
            self.flips.copy(), self.phases.copy(), self.delays.copy(), self.crushers.copy()
        )

    @classmethod
    def concat(cls, parts: list["Population"]) -> "Population":
        return cls(
            np.concatenate([p.flips for p in parts]),
            np.concatenate([p.phases for p in parts]),
            np.concatenate([p.delays for p in parts]),
            np.concatenate([p.crushers for p in parts]),
        )


def sequence_to_population(seqs: list[PulseSequence]) -> Population:
    return Population(
        np.array([[g.flips for g in s.genes] for s in seqs], dtype=float),
        np.array([[g.phases for g in s.genes] for s in seqs], dtype=float),
        np.array([[g.delay for g in s.genes] for s in seqs], dtype=float),
        np.array([[g.crusher for g in s.genes] for s in seqs], dtype=bool),
    )


def individual_to_sequence(
    pop: Population, index: int, channel_map: Optional[list[list[int]]] = None
) -> PulseSequence:
    genes = [
        PulseGene(
            flips=[float(x) for x in pop.flips[index, g]],
            phases=[float(x) for x in pop.phases[index, g]],
            delay=float(pop.delays[index, g]),
            crusher=bool(pop.crushers[index, g]),
        )
        for g in range(pop.m)
    ]
    return PulseSequence(n_channels=pop.flips.shape[2], genes=genes, channel_map=channel_map)


def batched_pulses(channel_of_spin: list[int], flips: np.ndarray, phases: np.ndarray) -> np.ndarray:
    """Hard-pulse propagators for arrays of (..., C) flips/phases, shape (..., 2^n, 2^n)."""
    c = np.cos(flips / 2.0)
    s = np.sin(flips / 2.0)
    e = np.exp(1j * phases)
    rot = np.empty(flips.shape + (2, 2), dtype=np.complex128)
    rot[..., 0, 0] = c
    rot[..., 0, 1] = -1j * s * e.conj()
    rot[..., 1, 0] = -1j * s * e
    rot[..., 1, 1] = c

    op = rot[..., channel_of_spin[0], :, :]
    for channel in channel_of_spin[1:]:
        r = rot[..., channel, :, :]
        d = op.shape[-1]
        op = np.einsum("...ij,...kl->...ikjl", op, r).reshape(op.shape[:-2] + (2 * d, 2 * d))
    return op


class CompiledProblem:
    """Per-problem constants shared by every fitness evaluation."""

    def __init__(self, problem: Problem):
        self.problem = problem
        system = problem.system
        self.n_channels = system.n_channels
        self.channel_of_spin = system.channel_of_spin()
        self.energies = hamiltonian_diagonal(system)
        self.dim = 2**system.n_spins
        self.keep = (coherence_orders(system.n_spins) == 0).astype(float)
        self.is_operator = problem.is_operator
        if self.is_operator:
            self.u_tar = np.asarray(problem.objective.unitary)
        else:
            self.rho_in = np.asarray(problem.objective.initial)
            self.rho_tar = np.asarray(problem.objective.target)
            self.norm_tar = float(np.linalg.norm(self.rho_tar))

    def propagate(self, pop: Population) -> np.ndarray:
        """Unitary (operator problems) or final deviation (state problems) per individual."""
        pulses = batched_pulses(self.channel_of_spin, pop.flips, pop.phases)
        free = np.exp(-1j * pop.delays[..., None] * self.energies)  # (P, m, D)

        if self.is_operator:
            out = np.broadcast_to(np.eye(self.dim, dtype=np.complex128), (pop.size, self.dim, self.dim)).copy()
            for g in range(pop.m):
                out = free[:, g, :, None] * (pulses[:, g] @ out)
            return out

        out = np.broadcast_to(self.rho_in, (pop.size, self.dim, self.dim)).astype(np.complex128)
        for g in range(pop.m):
            p = pulses[:, g]
            out = p @ out @ np.conj(np.swapaxes(p, -1, -2))
            f = free[:, g]
            out = f[:, :, None] * out * f.conj()[:, None, :]
            crush = pop.crushers[:, g]
            if crush.any():
                out = np.where(crush[:, None, None], out * self.keep, out)
        if self.problem.final_crusher:
            out = out * self.keep
        return out

    def fitness(self, pop: Population) -> np.ndarray:
        """Fidelity per individual; a state crushed to nothing scores -1."""
        result = self.propagate(pop)
        if self.is_operator:
            overlap = np.abs(np.einsum("ij,pij->p", self.u_tar.conj(), result)) / self.dim
            return np.minimum(overlap, 1.0)
        norms = np.linalg.norm(result, axis=(1, 2))
        overlap = np.einsum("ij,pij->p", self.rho_tar.conj(), result).real
        crushed = norms < ZERO_NORM
        safe = np.where(crushed, 1.0, norms)
        scores = np.clip(overlap / (safe * self.norm_tar), -1.0, 1.0)
        return np.where(crushed, CRUSHED_FITNESS, scores)


def check_compatible(seq: PulseSequence, problem: Problem) -> None:
    if seq.n_channels != problem.n_channels:
        raise ValueError(
            f"n_channels: sequence has {seq.n_channels} channels, "
            f"problem '{problem.name}' has {problem.n_channels}"
        )
    if problem.is_operator and seq.has_crushers():
        raise ValueError("crusher: operator problems only accept unitary sequences")


def simulate_sequence(seq: PulseSequence, problem: Problem) -> np.ndarray:
    """
    Run a sequence on a problem.

    Returns:
        The composed unitary for operator problems, or the deviation evolved
        from the problem's initial state for state problems
    """
    check_compatible(seq, problem)
    compiled = CompiledProblem(problem)
    return compiled.propagate(sequence_to_population([seq]))[0]


def evaluate_fitness(seq: PulseSequence, problem: Problem) -> float:
    """
    Fidelity of a sequence against the problem's target.

    Raises:
        ZeroNormError: a crusher removed the whole deviation
    """
    result = simulate_sequence(seq, problem)
    if problem.is_operator:
        return operator_fidelity(result, problem.objective.unitary)
    return state_fidelity(result, problem.objective.target)


def safe_fitness(seq: PulseSequence, problem: Problem) -> float:
    try:
        return evaluate_fitness(seq, problem)
    except ZeroNormError:
        return CRUSHED_FITNESS


def sequence_duration(seq: PulseSequence) -> float:
    """Total delay time in seconds; hard pulses take no time."""
    return float(sum(g.delay for g in seq.genes))


def concatenate(first: PulseSequence, second: PulseSequence) -> PulseSequence:
    """Sequence that applies `first` and then `second`."""
    if first.n_channels != second.n_channels:
        raise ValueError(
            f"n_channels: cannot join {first.n_channels}-channel and "
            f"{second.n_channels}-channel sequences"
        )
    return PulseSequence(
        n_channels=first.n_channels,
        genes=list(first.genes) + list(second.genes),
        channel_map=first.channel_map or second.channel_map,
    )


def repeated_gate_fidelity(seq: PulseSequence, problem: Problem, repeats: int) -> float:
    """Operator fidelity of seq applied `repeats` times against U_tar^repeats."""
    if not problem.is_operator:
        raise ValueError("problem: repeated gate fidelity needs an operator target")
    if repeats < 1:
        raise ValueError(f"repeats: must be >= 1, got {repeats}")
    u_pul = simulate_sequence(seq, problem)
    u_tar = np.asarray(problem.objective.unitary)
    return operator_fidelity(
        np.linalg.matrix_power(u_pul, repeats), np.linalg.matrix_power(u_tar, repeats)
    )

"""
Named optimization problems for the two-spin experiments: selective rotations,
the four controlled-NOT gates, pseudo-pure states and the Bell states.
"""
import logging
import math
from typing import Optional

from pulsegen.catalog.sqr import sqr_sequence
from pulsegen.catalog.targets import target_state, target_unitary
from pulsegen.ga.simulator import concatenate
from pulsegen.utils.objects import (
    GateLabel,
    GeneConstraint,
    OperatorTarget,
    Problem,
    PulseSequence,
    SequenceTemplate,
    SpinSystem,
    StateLabel,
    StateTarget,
)

logger = logging.getLogger(__name__)

DEFAULT_DELTA = 500.0
DEFAULT_J = 5.0

# the experiment applies (π/2)_y to one spin
SQR_THETA = math.pi / 2
SQR_PHI = math.pi / 2

PPS_GENES = 7
PPS_REFOCUS_GENE = 3
BELL_GENES = 10

GATES: dict[str, GateLabel] = {
    "sqr1": GateLabel.sqr(1, SQR_THETA, SQR_PHI),
    "sqr2": GateLabel.sqr(2, SQR_THETA, SQR_PHI),
    "cnot12": GateLabel.cnot(1, 2),
    "cnot1bar2": GateLabel.cnot(1, 2, negated=True),
    "cnot21": GateLabel.cnot(2, 1),
    "cnot2bar1": GateLabel.cnot(2, 1, negated=True),
}

STATES: dict[str, StateLabel] = {
    "pps00": StateLabel.PPS00,
    "pps01": StateLabel.PPS01,
    "pps10": StateLabel.PPS10,
    "pps11": StateLabel.PPS11,
    "bell-psi-plus": StateLabel.PSI_PLUS,
    "bell-psi-minus": StateLabel.PSI_MINUS,
    "bell-phi-plus": StateLabel.PHI_PLUS,
    "bell-phi-minus": StateLabel.PHI_MINUS,
}

# reachable from an optimized pps00 sequence plus selective π pulses
VIA_SQR = ("pps01", "pps10", "pps11")


def default_system(delta: float = DEFAULT_DELTA, j: float = DEFAULT_J) -> SpinSystem:
    return SpinSystem.two_spin(delta, j)


def list_problems() -> list[str]:
    return list(GATES) + list(STATES)


def problem_family(name: str) -> str:
    for prefix in ("sqr", "cnot", "pps", "bell"):
        if name.startswith(prefix):
            return prefix
    raise ValueError(f"problem: unknown problem '{name}'")


def sqr_template_constraints(theta: float) -> SequenceTemplate:
    """Flips pinned to (π/2, π/2, θ/2); phases and delays are searched."""
    return SequenceTemplate(
        genes=[
            GeneConstraint(flip=math.pi / 2),
            GeneConstraint(flip=math.pi / 2),
            GeneConstraint(flip=theta / 2),
        ]
    )


def pps_template() -> SequenceTemplate:
    """Six π/2 pulses and one refocusing π pulse; phases, delays and crushers free."""
    return SequenceTemplate(
        genes=[
            GeneConstraint(flip=math.pi if k == PPS_REFOCUS_GENE else math.pi / 2)
            for k in range(PPS_GENES)
        ]
    )


def bell_template() -> SequenceTemplate:
    return SequenceTemplate(genes=[GeneConstraint(flip=math.pi / 2) for _ in range(BELL_GENES)])


def gate_problem(name: str, system: SpinSystem) -> Problem:
    label = GATES[name]
    template = sqr_template_constraints(label.theta) if label.kind == "sqr" else None
    return Problem(
        name=name,
        system=system,
        objective=OperatorTarget(unitary=target_unitary(label, system.n_spins)),
        template=template,
    )


def state_problem(name: str, system: SpinSystem, final_crusher: bool = False) -> Problem:
    label = STATES[name]
    template = pps_template() if name.startswith("pps") else bell_template()
    return Problem(
        name=name,
        system=system,
        objective=StateTarget(initial=target_state(StateLabel.THERMAL), target=target_state(label)),
        template=template,
        allow_crushers=True,
        final_crusher=final_crusher,
    )


def catalog_problem(name: str, system: Optional[SpinSystem] = None, final_crusher: bool = False) -> Problem:
    """
    Build a catalogue problem.

    Args:
        name: one of list_problems()
        system: spin pair to optimize on; defaults to δ = 500 Hz, J = 5 Hz
        final_crusher: Bell problems only, append a crusher before scoring

    Returns:
        Problem with its target, template and crusher policy
    """
    system = system or default_system()
    if system.n_spins != 2:
        raise ValueError(f"system: catalogue problems need two spins, got {system.n_spins}")
    if name in GATES:
        return gate_problem(name, system)
    if name in STATES:
        return state_problem(name, system, final_crusher and name.startswith("bell"))
    raise ValueError(f"problem: unknown problem '{name}', expected one of {', '.join(list_problems())}")


def pps_via_sqr(pps00: PulseSequence, target: StateLabel, system: SpinSystem) -> PulseSequence:
    """
    Turn a |00> pseudo-pure preparation into |01>, |10> or |11> by appending
    selective π rotations of the spins whose bit must flip.
    """
    target = StateLabel(target)
    flips = {
        StateLabel.PPS00: (),
        StateLabel.PPS01: (2,),
        StateLabel.PPS10: (1,),
        StateLabel.PPS11: (1, 2),
    }
    if target not in flips:
        raise ValueError(f"target: {target.value} is not a pseudo-pure state")
    seq = pps00
    for spin in flips[target]:
        seq = concatenate(seq, sqr_sequence(spin, math.pi, 0.0, system))
    return seq

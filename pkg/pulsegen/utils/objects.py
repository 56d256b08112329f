from __future__ import annotations

import math
from enum import Enum
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from pulsegen.utils.utils import wrap_angle

UNITARY_TOL = 1e-10


class SpinSystem(BaseModel):
    """Weakly coupled spins in the rotating frame. Shifts and couplings are in Hz."""

    model_config = ConfigDict(frozen=True)

    shifts: list[float]
    j_coupling: list[list[float]]
    channels: list[list[int]]  # 1-based spin indices, one list per RF channel

    @model_validator(mode="after")
    def _check_layout(self) -> SpinSystem:
        n = len(self.shifts)
        if n < 1:
            raise ValueError("shifts: at least one spin is required")
        if len(self.j_coupling) != n or any(len(row) != n for row in self.j_coupling):
            raise ValueError(f"j_coupling: must be a {n}x{n} matrix")
        for i in range(n):
            if self.j_coupling[i][i] != 0.0:
                raise ValueError("j_coupling: diagonal must be zero")
            for k in range(i + 1, n):
                if self.j_coupling[i][k] != self.j_coupling[k][i]:
                    raise ValueError("j_coupling: must be symmetric")
        if any(len(ch) == 0 for ch in self.channels):
            raise ValueError("channels: empty channel")
        members = sorted(s for ch in self.channels for s in ch)
        if members != list(range(1, n + 1)):
            raise ValueError("channels: every spin must belong to exactly one channel")
        return self

    @classmethod
    def two_spin(cls, delta: float, j: float, separate_channels: bool = False) -> SpinSystem:
        """Homonuclear pair with shifts +delta/-delta; both spins share one channel by default."""
        channels = [[1], [2]] if separate_channels else [[1, 2]]
        return cls(
            shifts=[float(delta), -float(delta)],
            j_coupling=[[0.0, float(j)], [float(j), 0.0]],
            channels=channels,
        )

    @property
    def n_spins(self) -> int:
        return len(self.shifts)

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    def channel_of_spin(self) -> list[int]:
        """0-based channel index for every spin, in spin order."""
        owner = [0] * self.n_spins
        for c, spins in enumerate(self.channels):
            for s in spins:
                owner[s - 1] = c
        return owner

    def max_coupling(self) -> float:
        return max((abs(x) for row in self.j_coupling for x in row), default=0.0)

    def min_shift_difference(self) -> float:
        diffs = [
            abs(self.shifts[i] - self.shifts[k])
            for i in range(self.n_spins)
            for k in range(i + 1, self.n_spins)
            if self.shifts[i] != self.shifts[k]
        ]
        return min(diffs, default=0.0)

    def max_shift_difference(self) -> float:
        diffs = [
            abs(self.shifts[i] - self.shifts[k])
            for i in range(self.n_spins)
            for k in range(i + 1, self.n_spins)
        ]
        return max(diffs, default=0.0)

    def weak_coupling_ratio(self) -> float:
        """max|J| over the smallest nonzero shift difference."""
        j = self.max_coupling()
        diff = self.min_shift_difference()
        if diff == 0.0:
            return math.inf if j > 0.0 else 0.0
        return j / diff

    def default_max_delay(self) -> float:
        j = self.max_coupling()
        if j > 0.0:
            return 2.0 / j
        diff = self.max_shift_difference()
        if diff > 0.0:
            return 2.0 / diff
        return 1.0


class PulseGene(BaseModel):
    """One column pair of the chromosome: simultaneous pulses, then a delay."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    flips: list[float]
    phases: list[float]
    delay: float = Field(0.0, ge=0.0, alias="delay_s")
    crusher: bool = False

    @field_validator("flips", "phases")
    @classmethod
    def _wrap(cls, v: list[float]) -> list[float]:
        return [wrap_angle(x) for x in v]

    @model_validator(mode="after")
    def _check_channels(self) -> PulseGene:
        if not self.flips:
            raise ValueError("flips: at least one channel is required")
        if len(self.flips) != len(self.phases):
            raise ValueError("phases: one phase per channel flip is required")
        return self

    @property
    def n_channels(self) -> int:
        return len(self.flips)

    def is_null(self) -> bool:
        return all(f == 0.0 for f in self.flips) and self.delay == 0.0 and not self.crusher


class PulseSequence(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    n_channels: int = Field(ge=1)
    genes: list[PulseGene]
    channel_map: Optional[list[list[int]]] = None

    @model_validator(mode="after")
    def _check_genes(self) -> PulseSequence:
        if not self.genes:
            raise ValueError("genes: a sequence needs at least one gene")
        for i, gene in enumerate(self.genes):
            if gene.n_channels != self.n_channels:
                raise ValueError(
                    f"genes.{i}: has {gene.n_channels} channels, sequence has {self.n_channels}"
                )
        return self

    @property
    def m(self) -> int:
        return len(self.genes)

    def has_crushers(self) -> bool:
        return any(g.crusher for g in self.genes)


class GeneConstraint(BaseModel):
    """None leaves a parameter free; a value pins it (flip/phase apply to every channel)."""

    model_config = ConfigDict(frozen=True)

    flip: Optional[float] = None
    phase: Optional[float] = None
    delay: Optional[float] = Field(None, ge=0.0)
    crusher: Optional[bool] = None

    @field_validator("flip", "phase")
    @classmethod
    def _wrap(cls, v: Optional[float]) -> Optional[float]:
        return None if v is None else wrap_angle(v)


class SequenceTemplate(BaseModel):
    model_config = ConfigDict(frozen=True)

    genes: list[GeneConstraint]

    @field_validator("genes")
    @classmethod
    def _non_empty(cls, v: list[GeneConstraint]) -> list[GeneConstraint]:
        if not v:
            raise ValueError("a template needs at least one gene")
        return v

    @classmethod
    def free(cls, m: int) -> SequenceTemplate:
        return cls(genes=[GeneConstraint() for _ in range(m)])

    @property
    def m(self) -> int:
        return len(self.genes)

    def admits(self, seq: PulseSequence) -> bool:
        if seq.m != self.m:
            return False
        for c, g in zip(self.genes, seq.genes):
            if c.flip is not None and any(f != c.flip for f in g.flips):
                return False
            if c.phase is not None and any(p != c.phase for p in g.phases):
                return False
            if c.delay is not None and g.delay != c.delay:
                return False
            if c.crusher is not None and g.crusher != c.crusher:
                return False
        return True

    def summary(self) -> str:
        fixed_flips = sum(c.flip is not None for c in self.genes)
        fixed_phases = sum(c.phase is not None for c in self.genes)
        fixed_delays = sum(c.delay is not None for c in self.genes)
        return (
            f"{self.m} genes, {fixed_flips} fixed flips, "
            f"{fixed_phases} fixed phases, {fixed_delays} fixed delays"
        )


def _frozen_array(value, name: str) -> np.ndarray:
    arr = np.array(value, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name}: must be a square matrix")
    arr.setflags(write=False)
    return arr


class OperatorTarget(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kind: Literal["operator"] = "operator"
    unitary: np.ndarray

    @field_validator("unitary", mode="before")
    @classmethod
    def _check_unitary(cls, v) -> np.ndarray:
        u = _frozen_array(v, "unitary")
        err = np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0]))
        if err >= UNITARY_TOL:
            raise ValueError(f"unitary: not unitary (|U†U - I| = {err:.3e})")
        return u

    @property
    def dim(self) -> int:
        return self.unitary.shape[0]


class StateTarget(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kind: Literal["state"] = "state"
    initial: np.ndarray
    target: np.ndarray

    @field_validator("initial", "target", mode="before")
    @classmethod
    def _check_deviation(cls, v, info) -> np.ndarray:
        rho = _frozen_array(v, info.field_name)
        if np.linalg.norm(rho - rho.conj().T) >= 1e-10:
            raise ValueError(f"{info.field_name}: deviation must be Hermitian")
        if abs(np.trace(rho)) >= 1e-10:
            raise ValueError(f"{info.field_name}: deviation must be traceless")
        if np.linalg.norm(rho) == 0.0:
            raise ValueError(f"{info.field_name}: deviation must be nonzero")
        return rho

    @model_validator(mode="after")
    def _same_shape(self) -> StateTarget:
        if self.initial.shape != self.target.shape:
            raise ValueError("target: must have the same dimension as initial")
        return self

    @property
    def dim(self) -> int:
        return self.initial.shape[0]


class Problem(BaseModel):
    """Operator target (unitary sequences only) or state-to-state target plus a template."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str = "custom"
    system: SpinSystem
    objective: Union[OperatorTarget, StateTarget] = Field(discriminator="kind")
    template: Optional[SequenceTemplate] = None
    allow_crushers: bool = False
    final_crusher: bool = False

    @model_validator(mode="after")
    def _check_policy(self) -> Problem:
        if self.objective.dim != 2**self.system.n_spins:
            raise ValueError(
                f"objective: dimension {self.objective.dim} does not match "
                f"{self.system.n_spins} spins"
            )
        if self.is_operator and (self.allow_crushers or self.final_crusher):
            raise ValueError("allow_crushers: operator targets need unitary sequences")
        if self.template is not None and not self.allow_crushers:
            if any(c.crusher for c in self.template.genes):
                raise ValueError("template: fixes a crusher but crushers are not allowed")
        return self

    @property
    def is_operator(self) -> bool:
        return isinstance(self.objective, OperatorTarget)

    @property
    def kind(self) -> str:
        return self.objective.kind

    @property
    def n_channels(self) -> int:
        return self.system.n_channels


class GAConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    population_size: int = Field(100, ge=2)
    generations: int = Field(1000, ge=1)
    cutoff: float = Field(0.99, gt=0.0, le=1.0)
    target_fidelity: float = Field(0.9999, gt=0.0, le=1.0)  # early exit once reached
    elite_count: int = Field(2, ge=1)  # the best individual always survives
    tournament_size: int = Field(3, ge=1)
    crossover_rate: float = Field(0.8, ge=0.0, le=1.0)
    mutation_rate: float = Field(0.15, ge=0.0, le=1.0)
    angle_sigma: float = Field(0.1 * math.pi, ge=0.0)
    delay_sigma: float = Field(0.1, ge=0.0)  # fraction of d_max
    crusher_flip_rate: float = Field(0.05, ge=0.0, le=1.0)
    mutation_decay: float = Field(0.01, gt=0.0, le=1.0)
    d_max: Optional[float] = Field(None, gt=0.0)
    rng_seed: Optional[int] = Field(None, ge=0, lt=2**64)
    restarts: int = Field(3, ge=1)
    initial_genes: Optional[int] = Field(None, ge=1)
    max_genes: int = Field(12, ge=1)
    polish_generations: int = Field(50, ge=0)
    workers: int = Field(1, ge=1)
    reduction_tolerance: float = Field(1e-7, ge=0.0)
    refine_iterations: int = Field(200, ge=0)  # L-BFGS-B steps on the best individuals; 0 disables

    @model_validator(mode="after")
    def _check_sizes(self) -> GAConfig:
        if self.elite_count >= self.population_size:
            raise ValueError("elite_count: must be smaller than population_size")
        if self.tournament_size > self.population_size:
            raise ValueError("tournament_size: cannot exceed population_size")
        return self


class GenerationStats(BaseModel):
    generation: int
    best: float
    mean: float


class GAResult(BaseModel):
    best: PulseSequence
    best_fitness: float
    history: list[GenerationStats]
    seed: int
    converged: bool
    genes_before_reduction: Optional[int] = None


class HistorySummary(BaseModel):
    generations_run: int
    initial_best: float
    final_best: float
    final_mean: float


class RunReport(BaseModel):
    problem: str
    kind: Literal["operator", "state"]
    system: SpinSystem
    config: GAConfig
    seed: int
    best_fidelity: float
    converged: bool
    genes_before: int
    genes_after: int
    wall_time_s: float = Field(0.0, exclude=True)  # shown and logged, kept out of report.json
    history: HistorySummary


class GateLabel(BaseModel):
    """SQR(spin, θ, φ) or CNOT(control, target), `negated` marking a zero-controlled CNOT."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["sqr", "cnot"]
    spin: Optional[int] = None
    theta: Optional[float] = None
    phi: Optional[float] = None
    control: Optional[int] = None
    target: Optional[int] = None
    negated: bool = False

    @model_validator(mode="after")
    def _check(self) -> GateLabel:
        if self.kind == "sqr":
            if self.spin is None or self.spin < 1:
                raise ValueError("spin: SQR needs a spin index >= 1")
            if self.theta is None or not (0.0 < self.theta <= math.pi):
                raise ValueError("theta: SQR flip angle must lie in (0, pi]")
            if self.phi is None:
                raise ValueError("phi: SQR needs a phase")
        else:
            if self.control is None or self.target is None:
                raise ValueError("control: CNOT needs control and target spins")
            if self.control < 1 or self.target < 1 or self.control == self.target:
                raise ValueError("target: control and target must be distinct spins >= 1")
        return self

    @field_validator("phi")
    @classmethod
    def _wrap(cls, v: Optional[float]) -> Optional[float]:
        return None if v is None else wrap_angle(v)

    @classmethod
    def sqr(cls, spin: int, theta: float, phi: float) -> GateLabel:
        return cls(kind="sqr", spin=spin, theta=theta, phi=phi)

    @classmethod
    def cnot(cls, control: int, target: int, negated: bool = False) -> GateLabel:
        return cls(kind="cnot", control=control, target=target, negated=negated)

    @property
    def name(self) -> str:
        if self.kind == "sqr":
            return f"SQR({self.spin}, {self.theta:.6g}, {self.phi:.6g})"
        bar = "̅" if self.negated else ""
        return f"CNOT({self.control}{bar},{self.target})"


class StateLabel(str, Enum):
    PPS00 = "pps00"
    PPS01 = "pps01"
    PPS10 = "pps10"
    PPS11 = "pps11"
    PSI_PLUS = "psi+"
    PSI_MINUS = "psi-"
    PHI_PLUS = "phi+"
    PHI_MINUS = "phi-"
    THERMAL = "thermal"


class SweepGrid(BaseModel):
    model_config = ConfigDict(frozen=True)

    ratios: list[float] = Field(default_factory=lambda: [round(0.01 * k, 2) for k in range(11)])
    thetas: list[float] = Field(
        default_factory=lambda: [
            math.pi / 8,
            math.pi / 4,
            3 * math.pi / 8,
            math.pi / 2,
            3 * math.pi / 4,
            math.pi,
        ]
    )
    delta: float = Field(500.0, gt=0.0)

    @field_validator("ratios")
    @classmethod
    def _check_ratios(cls, v: list[float]) -> list[float]:
        if not v:
            raise ValueError("grid is empty")
        if any(r < 0.0 for r in v):
            raise ValueError("J/delta ratios must be >= 0")
        return v

    @field_validator("thetas")
    @classmethod
    def _check_thetas(cls, v: list[float]) -> list[float]:
        if not v:
            raise ValueError("grid is empty")
        if any(not (0.0 < t <= math.pi) for t in v):
            raise ValueError("flip angles must lie in (0, pi]")
        return v


class SweepRow(BaseModel):
    j_over_delta: float
    theta: Optional[float] = None
    fidelity: float
    converged: bool

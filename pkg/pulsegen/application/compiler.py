"""
PulseCompiler - compile a catalogue problem into a pulse sequence and verify
sequence files against a problem.
"""
import logging
import time
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel

from pulsegen.catalog.problems import STATES, VIA_SQR, catalog_problem, default_system, pps_via_sqr
from pulsegen.ga.engine import new_seed, optimize
from pulsegen.ga.simulator import CRUSHED_FITNESS, check_compatible, safe_fitness, simulate_sequence
from pulsegen.spin.fidelity import (
    diagonal_populations,
    operator_fidelity,
    state_fidelity,
    transfer_efficiency,
)
from pulsegen.utils.errors import ZeroNormError
from pulsegen.utils.objects import GAConfig, GAResult, HistorySummary, Problem, PulseSequence, RunReport
from pulsegen.utils.utils import load_sequence, save_sequence, write_history_csv

logger = logging.getLogger(__name__)

SEQUENCE_FILE = "sequence.json"
REPORT_FILE = "report.json"
HISTORY_FILE = "history.csv"


class VerifyReport(BaseModel):
    problem: str
    kind: str
    fidelity: float
    populations: Optional[list[float]] = None
    transfer_efficiency: Optional[float] = None


class CompileOutcome(BaseModel):
    report: RunReport
    sequence: PulseSequence
    files: list[Path]


def summarize_history(history) -> HistorySummary:
    return HistorySummary(
        generations_run=len(history),
        initial_best=history[0].best if history else float("nan"),
        final_best=history[-1].best if history else float("nan"),
        final_mean=history[-1].mean if history else float("nan"),
    )


class PulseCompiler:
    """Orchestrates problem construction, the GA search and file output."""

    def __init__(self, config: Optional[GAConfig] = None):
        self.config = config or GAConfig()

    def build_problem(
        self, name: str, delta: float, j: float, final_crusher: bool = False, via_sqr: bool = False
    ) -> Problem:
        if via_sqr and name not in VIA_SQR:
            raise ValueError(f"via_sqr: only {', '.join(VIA_SQR)} can be built from pps00, got '{name}'")
        return catalog_problem(name, default_system(delta, j), final_crusher=final_crusher)

    def optimize_via_sqr(self, problem: Problem, config: GAConfig) -> GAResult:
        """Optimize pps00 on the same system, then append selective π pulses."""
        base = optimize(catalog_problem("pps00", problem.system), config)
        sequence = pps_via_sqr(base.best, STATES[problem.name], problem.system)
        fidelity = safe_fitness(sequence, problem)
        logger.info(f"Appended {sequence.m - base.best.m} selective genes to pps00: F={fidelity:.6f}")
        genes_before = (base.genes_before_reduction or base.best.m) + sequence.m - base.best.m
        return base.model_copy(
            update={
                "best": sequence,
                "best_fitness": fidelity,
                "converged": fidelity >= config.cutoff,
                "genes_before_reduction": genes_before,
            }
        )

    def compile(
        self,
        name: str,
        delta: float,
        j: float,
        out_dir: Path,
        final_crusher: bool = False,
        via_sqr: bool = False,
    ) -> CompileOutcome:
        """
        Search a sequence for a catalogue problem and write sequence, report and history.

        Args:
            name: catalogue problem name
            delta: chemical shift offset in Hz (spins at +delta and -delta)
            j: coupling in Hz
            out_dir: directory for sequence.json, report.json and history.csv
            final_crusher: Bell problems only, crush before scoring
            via_sqr: pps01/pps10/pps11 only, optimize pps00 and append selective π pulses

        Returns:
            CompileOutcome with the report, the best sequence and the written paths
        """
        problem = self.build_problem(name, delta, j, final_crusher, via_sqr)
        seed = self.config.rng_seed if self.config.rng_seed is not None else new_seed()
        config = self.config.model_copy(update={"rng_seed": seed})
        logger.info(f"1. BUILT PROBLEM {name} ({problem.kind}) WITH SEED {seed}")

        started = time.perf_counter()
        result = self.optimize_via_sqr(problem, config) if via_sqr else optimize(problem, config)
        wall_time = time.perf_counter() - started
        logger.info(f"2. GA FINISHED: F={result.best_fitness:.6f} IN {wall_time:.1f}s")

        report = RunReport(
            problem=name,
            kind=problem.kind,
            system=problem.system,
            config=config,
            seed=seed,
            best_fidelity=result.best_fitness,
            converged=result.converged,
            genes_before=result.genes_before_reduction or result.best.m,
            genes_after=result.best.m,
            wall_time_s=wall_time,
            history=summarize_history(result.history),
        )

        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        files = [out_dir / SEQUENCE_FILE, out_dir / REPORT_FILE, out_dir / HISTORY_FILE]
        save_sequence(files[0], result.best)
        files[1].write_text(report.model_dump_json(indent=2) + "\n")
        write_history_csv(files[2], result.history)
        logger.info(f"3. WROTE {', '.join(str(f) for f in files)}")
        return CompileOutcome(report=report, sequence=result.best, files=files)

    def verify(
        self,
        sequence_path: Path,
        name: str,
        delta: float,
        j: float,
        final_crusher: bool = False,
    ) -> VerifyReport:
        """Re-simulate a sequence file against a catalogue problem."""
        sequence = load_sequence(sequence_path)
        problem = self.build_problem(name, delta, j, final_crusher)
        return verify_sequence(sequence, problem)


def verify_sequence(sequence: PulseSequence, problem: Problem) -> VerifyReport:
    check_compatible(sequence, problem)
    result = simulate_sequence(sequence, problem)
    if problem.is_operator:
        fidelity = operator_fidelity(result, problem.objective.unitary)
        return VerifyReport(problem=problem.name, kind=problem.kind, fidelity=fidelity)

    try:
        fidelity = state_fidelity(result, problem.objective.target)
    except ZeroNormError:
        logger.warning(f"'{problem.name}': the sequence crushes the whole deviation")
        fidelity = CRUSHED_FITNESS
    return VerifyReport(
        problem=problem.name,
        kind=problem.kind,
        fidelity=fidelity,
        populations=[float(x) for x in diagonal_populations(result)],
        transfer_efficiency=transfer_efficiency(result, np.asarray(problem.objective.initial)),
    )

"""
Fidelity against J/δ: re-solve a problem family over a grid of coupling ratios.
"""
import logging
import math
from typing import Optional

import numpy as np

from pulsegen.catalog.problems import SQR_PHI, catalog_problem, problem_family, sqr_template_constraints
from pulsegen.catalog.sqr import solve_sqr, sqr_problem
from pulsegen.ga.engine import new_seed, optimize, run_ga
from pulsegen.utils.errors import SolverError
from pulsegen.utils.objects import GAConfig, GAResult, SpinSystem, SweepGrid, SweepRow

logger = logging.getLogger(__name__)

FAMILIES = ("sqr", "cnot", "pps")
SOLVERS = ("template", "ga")
DEFAULT_MEMBER = {"cnot": "cnot12", "pps": "pps00"}


def point_seeds(seed: int, count: int) -> list[int]:
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


class FidelitySweep:
    def __init__(self, family: str, grid: SweepGrid, solver: str, config: GAConfig, member: Optional[str] = None):
        if family not in FAMILIES:
            raise ValueError(f"family: expected one of {', '.join(FAMILIES)}, got '{family}'")
        if solver not in SOLVERS:
            raise ValueError(f"solver: expected one of {', '.join(SOLVERS)}, got '{solver}'")
        self.family = family
        self.grid = grid
        self.solver = solver
        if member is not None and (family == "sqr" or problem_family(member) != family):
            raise ValueError(f"member: '{member}' is not a {family} problem")
        self.member = member or DEFAULT_MEMBER.get(family)
        seed = config.rng_seed if config.rng_seed is not None else new_seed()
        self.config = config.model_copy(update={"rng_seed": seed})

    def system(self, ratio: float) -> SpinSystem:
        return SpinSystem.two_spin(self.grid.delta, ratio * self.grid.delta)

    def run(self) -> list[SweepRow]:
        logger.info(
            f"1. SWEEPING {self.family} OVER {len(self.grid.ratios)} RATIOS WITH THE {self.solver} SOLVER"
        )
        rows = self.sqr_rows() if self.family == "sqr" else self.ga_rows()
        flagged = sum(not r.converged for r in rows)
        logger.info(f"2. SWEEP DONE: {len(rows)} ROWS, {flagged} FLAGGED")
        return rows

    def sqr_rows(self) -> list[SweepRow]:
        rows = []
        seeds = point_seeds(self.config.rng_seed, len(self.grid.ratios) * len(self.grid.thetas))
        for i, ratio in enumerate(self.grid.ratios):
            system = self.system(ratio)
            for k, theta in enumerate(self.grid.thetas):
                if self.solver == "template":
                    fidelity = self.solve_sqr_point(theta, system)
                else:
                    problem = sqr_problem(1, theta, SQR_PHI, system).model_copy(
                        update={"template": sqr_template_constraints(theta)}
                    )
                    config = self.config.model_copy(update={"rng_seed": seeds[i * len(self.grid.thetas) + k]})
                    fidelity = optimize(problem, config).best_fitness
                rows.append(
                    SweepRow(
                        j_over_delta=ratio,
                        theta=theta,
                        fidelity=fidelity,
                        converged=not math.isnan(fidelity) and fidelity >= self.config.cutoff,
                    )
                )
        return rows

    def solve_sqr_point(self, theta: float, system: SpinSystem) -> float:
        try:
            return solve_sqr(1, theta, SQR_PHI, system).fidelity
        except SolverError as e:
            logger.error(f"SQR solve failed at theta={theta:.4f}: {e}", exc_info=True)
            return e.fidelity if e.fidelity is not None else math.nan

    def ga_rows(self) -> list[SweepRow]:
        rows = []
        seeds = point_seeds(self.config.rng_seed, len(self.grid.ratios))
        previous: Optional[GAResult] = None
        for ratio, seed in zip(self.grid.ratios, seeds):
            problem = catalog_problem(self.member, self.system(ratio))
            config = self.config.model_copy(update={"rng_seed": seed})
            if self.solver == "template" and previous is not None:
                result = self.continue_from(previous, problem, config)
            else:
                result = optimize(problem, config)
            logger.info(f"J/delta={ratio}: F={result.best_fitness:.6f}")
            rows.append(
                SweepRow(j_over_delta=ratio, fidelity=result.best_fitness, converged=result.converged)
            )
            if result.converged:
                previous = result
        return rows

    def continue_from(self, previous: GAResult, problem, config: GAConfig) -> GAResult:
        """Re-solve the free parameters starting from the last converged point."""
        result = run_ga(problem, config, seeds=[previous.best], n_genes=previous.best.m)
        if result.converged:
            return result
        logger.warning("continuation did not converge, running a full search")
        fresh = optimize(problem, config)
        return fresh if fresh.best_fitness > result.best_fitness else result


def fidelity_sweep(
    family: str,
    grid: Optional[SweepGrid] = None,
    solver: str = "template",
    config: Optional[GAConfig] = None,
    member: Optional[str] = None,
) -> list[SweepRow]:
    """
    Fidelity table over J/δ (and θ for the sqr family).

    Args:
        family: "sqr", "cnot" or "pps"
        grid: ratios, flip angles and reference δ; defaults cover 0..0.1
        solver: "template" re-solves the known structure point by point,
            "ga" runs an independent search at every point
        config: GA settings; its seed fixes every point's substream
        member: catalogue problem of the family (e.g. "cnot21"); defaults to
            cnot12 / pps00

    Returns:
        One SweepRow per grid point; failures are flagged, not raised
    """
    return FidelitySweep(family, grid or SweepGrid(), solver, config or GAConfig(), member).run()

"""
Real-coded genetic algorithm over pulse sequences.

Selection is a size-k tournament, the best `elite_count` individuals survive
unchanged, children come from blend crossover of two tournament winners and
Gaussian mutation whose width shrinks geometrically over the run. The best
individuals of every run are then polished with L-BFGS-B on their free
continuous parameters.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from pulsegen.ga.simulator import (
    CompiledProblem,
    Population,
    check_compatible,
    individual_to_sequence,
    safe_fitness,
    sequence_to_population,
)
from pulsegen.utils.objects import (
    GAConfig,
    GAResult,
    GeneConstraint,
    GenerationStats,
    Problem,
    PulseSequence,
    SequenceTemplate,
    SpinSystem,
)
from pulsegen.utils.utils import TWO_PI

logger = logging.getLogger(__name__)

OPERATOR_START_GENES = 3
STATE_START_GENES = 7

REFINE_CANDIDATES = 3
REFINE_STEP = 1e-6  # central-difference step in radians / delay units
REFINE_SKIP = 1e-12  # individuals this close to F = 1 are left alone


def wrap_angles(values: np.ndarray) -> np.ndarray:
    wrapped = np.mod(values, TWO_PI)
    return np.where(wrapped >= TWO_PI, 0.0, wrapped)


def reflect_delays(values: np.ndarray, d_max: float) -> np.ndarray:
    shifted = np.mod(values, 2.0 * d_max)
    return np.where(shifted > d_max, 2.0 * d_max - shifted, shifted)


def new_seed() -> int:
    return int(np.random.SeedSequence().generate_state(1, dtype=np.uint64)[0])


def resolve_d_max(problem: Problem, config: GAConfig) -> float:
    return config.d_max if config.d_max is not None else problem.system.default_max_delay()


def delay_unit(system: SpinSystem, d_max: float) -> float:
    """Period of the fastest free precession; refinement measures delays in it."""
    fastest = max(
        system.max_shift_difference(),
        system.max_coupling(),
        max(abs(s) for s in system.shifts),
    )
    return 1.0 / fastest if fastest > 0.0 else d_max


class ParameterSpace:
    """Which chromosome entries are free for a template, and the values pinned for the rest."""

    def __init__(self, template: SequenceTemplate, n_channels: int, allow_crushers: bool, d_max: float):
        self.m = template.m
        self.n_channels = n_channels
        self.d_max = d_max
        genes = template.genes
        self.flip_fixed = np.array([c.flip is not None for c in genes])
        self.flip_value = np.array([c.flip or 0.0 for c in genes])
        self.phase_fixed = np.array([c.phase is not None for c in genes])
        self.phase_value = np.array([c.phase or 0.0 for c in genes])
        self.delay_fixed = np.array([c.delay is not None for c in genes])
        self.delay_value = np.array([c.delay or 0.0 for c in genes])
        if allow_crushers:
            self.crusher_fixed = np.array([c.crusher is not None for c in genes])
            self.crusher_value = np.array([bool(c.crusher) for c in genes])
        else:
            self.crusher_fixed = np.ones(self.m, dtype=bool)
            self.crusher_value = np.zeros(self.m, dtype=bool)

    def random(self, rng: np.random.Generator, size: int) -> Population:
        shape = (size, self.m, self.n_channels)
        pop = Population(
            flips=rng.uniform(0.0, TWO_PI, shape),
            phases=rng.uniform(0.0, TWO_PI, shape),
            delays=rng.uniform(0.0, self.d_max, (size, self.m)),
            crushers=rng.random((size, self.m)) < 0.5,
        )
        return self.enforce(pop)

    def enforce(self, pop: Population) -> Population:
        """Wrap angles, reflect delays into [0, d_max] and restore pinned entries."""
        flips = np.where(self.flip_fixed[None, :, None], self.flip_value[None, :, None], wrap_angles(pop.flips))
        phases = np.where(
            self.phase_fixed[None, :, None], self.phase_value[None, :, None], wrap_angles(pop.phases)
        )
        delays = np.where(
            self.delay_fixed[None, :], self.delay_value[None, :], reflect_delays(pop.delays, self.d_max)
        )
        crushers = np.where(self.crusher_fixed[None, :], self.crusher_value[None, :], pop.crushers)
        return Population(flips, phases, delays, crushers)


class GeneticOptimizer:
    """One GA run at a fixed gene count."""

    def __init__(self, problem: Problem, config: GAConfig, template: SequenceTemplate):
        self.problem = problem
        self.config = config
        self.template = template
        self.compiled = CompiledProblem(problem)
        self.space = ParameterSpace(
            template, problem.n_channels, problem.allow_crushers, resolve_d_max(problem, config)
        )
        self.channel_map = problem.system.channels
        self.delay_unit = delay_unit(problem.system, self.space.d_max)

    def evaluate(self, pop: Population) -> np.ndarray:
        workers = self.config.workers
        if workers <= 1 or pop.size < 2 * workers:
            return self.compiled.fitness(pop)
        chunks = np.array_split(np.arange(pop.size), workers)
        with ThreadPoolExecutor(max_workers=workers) as executor:
            parts = list(executor.map(lambda idx: self.compiled.fitness(pop.take(idx)), chunks))
        return np.concatenate(parts)

    def tournament(self, fitness: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        k = self.config.tournament_size
        contestants = np.sort(rng.integers(0, fitness.size, size=(n, k)), axis=1)
        # argmax keeps the first maximum, i.e. the lowest population index
        return contestants[np.arange(n), np.argmax(fitness[contestants], axis=1)]

    def crossover(self, a: Population, b: Population, rng: np.random.Generator) -> Population:
        n = a.size
        mate = rng.random(n) < self.config.crossover_rate
        alpha_f = rng.random(a.flips.shape)
        alpha_p = rng.random(a.phases.shape)
        alpha_d = rng.random(a.delays.shape)
        pick = rng.random(a.crushers.shape) < 0.5

        def blend_angle(x, y, alpha):
            arc = np.mod(y - x + math.pi, TWO_PI) - math.pi
            return x + alpha * arc

        flips = np.where(mate[:, None, None], blend_angle(a.flips, b.flips, alpha_f), a.flips)
        phases = np.where(mate[:, None, None], blend_angle(a.phases, b.phases, alpha_p), a.phases)
        delays = np.where(mate[:, None], a.delays + alpha_d * (b.delays - a.delays), a.delays)
        crushers = np.where(mate[:, None] & pick, b.crushers, a.crushers)
        return Population(flips, phases, delays, crushers)

    def mutate(self, pop: Population, scale: float, rng: np.random.Generator) -> Population:
        cfg = self.config
        angle_sigma = cfg.angle_sigma * scale
        delay_sigma = cfg.delay_sigma * self.space.d_max * scale

        hit_f = rng.random(pop.flips.shape) < cfg.mutation_rate
        hit_p = rng.random(pop.phases.shape) < cfg.mutation_rate
        hit_d = rng.random(pop.delays.shape) < cfg.mutation_rate
        toggle = rng.random(pop.crushers.shape) < cfg.crusher_flip_rate
        noise_f = rng.normal(0.0, 1.0, pop.flips.shape)
        noise_p = rng.normal(0.0, 1.0, pop.phases.shape)
        noise_d = rng.normal(0.0, 1.0, pop.delays.shape)

        return Population(
            flips=pop.flips + hit_f * angle_sigma * noise_f,
            phases=pop.phases + hit_p * angle_sigma * noise_p,
            delays=pop.delays + hit_d * delay_sigma * noise_d,
            crushers=np.logical_xor(pop.crushers, toggle),
        )

    def seed_population(self, rng: np.random.Generator, seeds: list[PulseSequence]) -> Population:
        pop = self.space.random(rng, self.config.population_size)
        if not seeds:
            return pop
        usable = [s for s in seeds if s.m == self.space.m][: self.config.population_size]
        if len(usable) < len(seeds):
            logger.warning(f"Ignoring {len(seeds) - len(usable)} seed sequences of the wrong length")
        if not usable:
            return pop
        for s in usable:
            check_compatible(s, self.problem)
        seeded = self.space.enforce(sequence_to_population(usable))
        rest = pop.take(np.arange(len(usable), pop.size))
        return Population.concat([seeded, rest])

    def run(self, rng: np.random.Generator, seed: int, seeds: Optional[list[PulseSequence]] = None) -> GAResult:
        cfg = self.config
        stop_at = max(cfg.cutoff, cfg.target_fidelity)
        pop = self.seed_population(rng, seeds or [])
        fitness = self.evaluate(pop)

        best_idx = int(np.argmax(fitness))
        best = pop.take([best_idx])
        best_fitness = float(fitness[best_idx])
        history: list[GenerationStats] = []

        for generation in range(cfg.generations):
            current = int(np.argmax(fitness))
            if fitness[current] > best_fitness:
                best_fitness = float(fitness[current])
                best = pop.take([current])
            history.append(
                GenerationStats(
                    generation=generation, best=float(fitness[current]), mean=float(fitness.mean())
                )
            )
            logger.debug(f"generation {generation}: best={fitness[current]:.6f} mean={fitness.mean():.6f}")
            if best_fitness >= stop_at or generation == cfg.generations - 1:
                break

            progress = generation / max(1, cfg.generations - 1)
            scale = cfg.mutation_decay**progress
            pop = self.breed(pop, fitness, scale, rng)
            fitness = self.evaluate(pop)

        best, best_fitness = self.refine_best(pop, fitness, best, best_fitness)
        return GAResult(
            best=individual_to_sequence(best, 0, self.channel_map),
            best_fitness=best_fitness,
            history=history,
            seed=seed,
            converged=best_fitness >= cfg.cutoff,
        )

    def breed(self, pop: Population, fitness: np.ndarray, scale: float, rng: np.random.Generator) -> Population:
        n_elite = self.config.elite_count
        n_children = pop.size - n_elite
        order = np.argsort(-fitness, kind="stable")
        elites = pop.take(order[:n_elite])
        parents_a = pop.take(self.tournament(fitness, n_children, rng))
        parents_b = pop.take(self.tournament(fitness, n_children, rng))
        children = self.crossover(parents_a, parents_b, rng)
        children = self.space.enforce(self.mutate(children, scale, rng))
        return Population.concat([elites, children])

    def refine(self, individual: Population, fitness: float) -> tuple[Population, float]:
        """
        Polish the free flips, phases and delays of one individual with L-BFGS-B.

        Crusher flags and pinned entries are left as they are. Delays are
        measured in `delay_unit` and bounded to [0, d_max]; the gradient is a
        central difference evaluated as a single batch.

        Returns:
            the refined individual and its fitness, or the input when nothing improved
        """
        if self.config.refine_iterations == 0 or fitness >= 1.0 - REFINE_SKIP:
            return individual, fitness
        space = self.space
        shape = (space.m, space.n_channels)
        flip_free = np.broadcast_to(~space.flip_fixed[:, None], shape)
        phase_free = np.broadcast_to(~space.phase_fixed[:, None], shape)
        delay_free = ~space.delay_fixed
        n_angles = int(flip_free.sum()) + int(phase_free.sum())
        n = n_angles + int(delay_free.sum())
        if n == 0:
            return individual, fitness
        n_flips = int(flip_free.sum())
        unit = self.delay_unit

        def unpack(xs: np.ndarray) -> Population:
            k = xs.shape[0]
            flips = np.repeat(individual.flips, k, axis=0)
            phases = np.repeat(individual.phases, k, axis=0)
            delays = np.repeat(individual.delays, k, axis=0)
            flips[:, flip_free] = xs[:, :n_flips]
            phases[:, phase_free] = xs[:, n_flips:n_angles]
            delays[:, delay_free] = xs[:, n_angles:] * unit
            return Population(flips, phases, delays, np.repeat(individual.crushers, k, axis=0))

        steps = REFINE_STEP * np.vstack([np.zeros(n), np.eye(n), -np.eye(n)])

        def loss(x: np.ndarray) -> tuple[float, np.ndarray]:
            values = 1.0 - self.evaluate(unpack(x[None, :] + steps))
            grad = (values[1 : n + 1] - values[n + 1 :]) / (2.0 * REFINE_STEP)
            return float(values[0]), grad

        x0 = np.concatenate(
            [
                individual.flips[0][flip_free],
                individual.phases[0][phase_free],
                individual.delays[0][delay_free] / unit,
            ]
        )
        bounds = [(None, None)] * n_angles + [(0.0, space.d_max / unit)] * (n - n_angles)
        result = minimize(
            loss,
            x0,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": self.config.refine_iterations, "ftol": 1e-15, "gtol": 1e-12},
        )
        candidate = space.enforce(unpack(result.x[None, :]))
        score = float(self.evaluate(candidate)[0])
        logger.debug(f"refined {fitness:.10f} -> {score:.10f} in {result.nit} iterations")
        if score > fitness:
            return candidate, score
        return individual, fitness

    def refine_best(
        self, pop: Population, fitness: np.ndarray, best: Population, best_fitness: float
    ) -> tuple[Population, float]:
        """Refine the fittest few of the final population and keep the best outcome."""
        if self.config.refine_iterations == 0:
            return best, best_fitness
        order = np.argsort(-fitness, kind="stable")[:REFINE_CANDIDATES]
        candidates = [(pop.take([int(idx)]), float(fitness[idx])) for idx in order]
        if best_fitness > fitness[order[0]]:
            candidates.insert(0, (best, best_fitness))
        refined = [self.refine(individual, score) for individual, score in candidates]
        return max(refined, key=lambda r: r[1])


def default_gene_count(problem: Problem, config: GAConfig) -> int:
    if problem.template is not None:
        return problem.template.m
    if config.initial_genes is not None:
        return config.initial_genes
    return OPERATOR_START_GENES if problem.is_operator else STATE_START_GENES


def run_ga(
    problem: Problem,
    config: GAConfig,
    seeds: Optional[list[PulseSequence]] = None,
    n_genes: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> GAResult:
    """
    Evolve sequences for one problem at one gene count.

    Args:
        problem: target and template; a free problem uses `n_genes` genes
        config: GA parameters; `rng_seed` makes the run reproducible
        seeds: sequences placed into the initial population
        n_genes: gene count for problems without a template
        rng: generator to draw from instead of one seeded from the config

    Returns:
        GAResult with the best individual, per-generation history and the seed used
    """
    if problem.template is not None:
        template = problem.template
    else:
        template = SequenceTemplate.free(n_genes or default_gene_count(problem, config))

    seed = config.rng_seed if config.rng_seed is not None else new_seed()
    if rng is None:
        rng = np.random.default_rng(seed)
    optimizer = GeneticOptimizer(problem, config, template)
    result = optimizer.run(rng, seed, seeds)
    logger.info(
        f"GA on '{problem.name}' with {template.m} genes: best {result.best_fitness:.6f} "
        f"after {len(result.history)} generations"
    )
    return result


def optimize(problem: Problem, config: GAConfig) -> GAResult:
    """
    Full search: restarts at each gene count, growing the chromosome until the
    cutoff is met, then gene reduction on the winner.
    """
    seed = config.rng_seed if config.rng_seed is not None else new_seed()
    streams = np.random.SeedSequence(seed)

    if problem.template is not None:
        gene_counts = [problem.template.m]
    else:
        start = default_gene_count(problem, config)
        gene_counts = list(range(start, max(start, config.max_genes) + 1))

    best: Optional[GAResult] = None
    for m in gene_counts:
        for attempt in range(config.restarts):
            rng = np.random.default_rng(streams.spawn(1)[0])
            result = run_ga(problem, config, n_genes=m, rng=rng)
            logger.info(f"1. ATTEMPT {attempt + 1}/{config.restarts} AT m={m}: F={result.best_fitness:.6f}")
            if best is None or result.best_fitness > best.best_fitness:
                best = result
            if result.converged:
                break
        if best is not None and best.converged:
            break

    assert best is not None
    best = best.model_copy(update={"seed": seed})
    if not best.converged:
        logger.warning(
            f"'{problem.name}' did not reach cutoff {config.cutoff}: best {best.best_fitness:.6f}"
        )
        return best.model_copy(update={"best_fitness": safe_fitness(best.best, problem)})

    genes_before = best.best.m
    reduced = reduce_genes(best, problem, config)
    logger.info(f"2. REDUCED {genes_before} GENES TO {reduced.m}")
    return best.model_copy(
        update={
            "best": reduced,
            "best_fitness": safe_fitness(reduced, problem),
            "genes_before_reduction": genes_before,
        }
    )


class _Reducer:
    """Greedy gene-count reduction with optional polishing of what remains."""

    def __init__(self, problem: Problem, config: GAConfig, seed: int):
        self.problem = problem
        self.config = config
        self.rng = np.random.default_rng([seed, 1])
        self.can_remove = problem.template is None
        self.pins: list[dict] = []

    def floor(self, original: float) -> float:
        return max(self.config.cutoff, original - self.config.reduction_tolerance)

    def constraints(self, m: int) -> SequenceTemplate:
        base = self.problem.template.genes if self.problem.template is not None else [GeneConstraint()] * m
        genes = [c.model_copy(update=pin) for c, pin in zip(base, self.pins)]
        return SequenceTemplate(genes=genes)

    def refine(self, candidate: PulseSequence) -> tuple[PulseSequence, float]:
        """L-BFGS-B on the entries the pins leave free; zero delays and flips stay zero."""
        genes = []
        for constraint, gene in zip(self.constraints(candidate.m).genes, candidate.genes):
            pin = {}
            if constraint.delay is None and gene.delay == 0.0:
                pin["delay"] = 0.0
            if constraint.flip is None and all(f == 0.0 for f in gene.flips):
                pin["flip"] = 0.0
            genes.append(constraint.model_copy(update=pin))
        template = SequenceTemplate(genes=genes)
        sub_problem = self.problem.model_copy(update={"template": template})
        optimizer = GeneticOptimizer(sub_problem, self.config, template)
        individual = optimizer.space.enforce(sequence_to_population([candidate]))
        fitness = safe_fitness(candidate, self.problem)
        refined, score = optimizer.refine(individual, float(optimizer.evaluate(individual)[0]))
        if refined is individual:
            return candidate, fitness
        sequence = individual_to_sequence(refined, 0, self.problem.system.channels)
        score = safe_fitness(sequence, self.problem)
        if score > fitness:
            return sequence, score
        return candidate, fitness

    def polish(self, candidate: PulseSequence) -> tuple[PulseSequence, float]:
        cfg = self.config
        fitness = safe_fitness(candidate, self.problem)
        if cfg.polish_generations == 0:
            return candidate, fitness
        polish_config = cfg.model_copy(
            update={
                "generations": cfg.polish_generations,
                "angle_sigma": cfg.angle_sigma * 0.1,
                "delay_sigma": cfg.delay_sigma * 0.1,
            }
        )
        sub_problem = self.problem.model_copy(update={"template": self.constraints(candidate.m)})
        result = GeneticOptimizer(sub_problem, polish_config, sub_problem.template).run(
            self.rng, 0, [candidate]
        )
        if result.best_fitness > fitness:
            return result.best, safe_fitness(result.best, self.problem)
        return candidate, fitness

    def attempt(self, candidate: PulseSequence, floor: float) -> Optional[PulseSequence]:
        fitness = safe_fitness(candidate, self.problem)
        if fitness >= floor:
            return candidate
        polished, fitness = self.polish(candidate)
        return polished if fitness >= floor else None


def _drop_null_genes(seq: PulseSequence) -> PulseSequence:
    kept = [g for g in seq.genes if not g.is_null()]
    if not kept or len(kept) == seq.m:
        return seq
    return seq.model_copy(update={"genes": kept})


def reduce_genes(result: GAResult, problem: Problem, config: GAConfig) -> PulseSequence:
    """
    Shrink a converged sequence: drop null genes, then try removing whole genes,
    zeroing delays and zeroing flips, keeping each change only if fidelity
    stays at or above max(cutoff, F - reduction_tolerance). The free entries
    of what is left are refined once more at the end.
    """
    seq = result.best
    original = safe_fitness(seq, problem)
    if original < config.cutoff:
        logger.warning(f"reduce_genes: input fidelity {original:.6f} is below cutoff {config.cutoff}")
        return seq

    reducer = _Reducer(problem, config, result.seed)
    floor = reducer.floor(original)

    if reducer.can_remove:
        trimmed = _drop_null_genes(seq)
        if safe_fitness(trimmed, problem) >= floor:
            seq = trimmed
    reducer.pins = [{} for _ in range(seq.m)]

    if reducer.can_remove:
        g = seq.m - 1
        while g >= 0 and seq.m > 1:
            genes = list(seq.genes)
            del genes[g]
            pins = reducer.pins
            reducer.pins = pins[:g] + pins[g + 1 :]
            accepted = reducer.attempt(seq.model_copy(update={"genes": genes}), floor)
            if accepted is not None:
                logger.debug(f"removed gene {g}")
                seq = accepted
            else:
                reducer.pins = pins
            g -= 1

    template = reducer.constraints(seq.m)
    for g in range(seq.m):
        if seq.genes[g].delay == 0.0 or template.genes[g].delay is not None:
            continue
        reducer.pins[g] = {**reducer.pins[g], "delay": 0.0}
        genes = list(seq.genes)
        genes[g] = genes[g].model_copy(update={"delay": 0.0})
        accepted = reducer.attempt(seq.model_copy(update={"genes": genes}), floor)
        if accepted is not None:
            logger.debug(f"zeroed delay of gene {g}")
            seq = accepted
        else:
            reducer.pins[g] = {k: v for k, v in reducer.pins[g].items() if k != "delay"}

    template = reducer.constraints(seq.m)
    for g in range(seq.m):
        if all(f == 0.0 for f in seq.genes[g].flips) or template.genes[g].flip is not None:
            continue
        reducer.pins[g] = {**reducer.pins[g], "flip": 0.0}
        genes = list(seq.genes)
        genes[g] = genes[g].model_copy(update={"flips": [0.0] * seq.n_channels})
        accepted = reducer.attempt(seq.model_copy(update={"genes": genes}), floor)
        if accepted is not None:
            logger.debug(f"zeroed flips of gene {g}")
            seq = accepted
        else:
            reducer.pins[g] = {k: v for k, v in reducer.pins[g].items() if k != "flip"}

    if reducer.can_remove:
        kept = [g for g in range(seq.m) if not seq.genes[g].is_null()]
        trimmed = _drop_null_genes(seq)
        if trimmed is not seq and safe_fitness(trimmed, problem) >= floor:
            seq = trimmed
            reducer.pins = [reducer.pins[g] for g in kept]

    # zeroed entries stay pinned; everything else is polished once more
    seq, _ = reducer.refine(seq)
    return seq

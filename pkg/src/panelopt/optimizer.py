"""Genetic search over B-spline airfoils for maximum lift-to-drag at zero incidence."""
from __future__ import annotations

import io
import statistics
from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np

from .batch_pipeline import PipelineConfig, Problem, ProblemResult, TimingReport, Workload, evaluate_problem, run_pipelined
from .errors import ShapeMismatch
from .geometry import BsplineGenome, fit_bspline, naca4
from .panel_core import FlowCondition

GENERATION_LOG_COLUMNS = (
    "generation", "best_fitness", "median_fitness", "best_cl", "best_cd", "penalized", "best_genome",
)


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 1000
    generations: int = 10
    tournament_size: int = 3
    mutation_sigma: float = 0.01
    mutation_rate: float = 0.9
    elite_count: int = 2
    rng_seed: int = 0
    panels_per_airfoil: int = 200
    Re: float = 1e6
    invalid_fitness_penalty: float = -1000.0
    # laminar separation ahead of this chord station on either surface is penalized
    min_separation_x: float = 0.5
    coeffs_per_surface: int = 10
    init_jitter: float = 0.002
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)

    def __post_init__(self):
        if self.population_size < 4:
            raise ValueError(f"population_size must be >= 4, got {self.population_size}")
        if not 0 <= self.elite_count < self.population_size:
            raise ValueError("elite_count must lie in [0, population_size)")
        if self.tournament_size < 2:
            raise ValueError("tournament_size must be >= 2")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must lie in [0, 1]")
        if self.mutation_sigma < 0.0 or self.init_jitter < 0.0:
            raise ValueError("mutation_sigma and init_jitter must be >= 0")
        if self.panels_per_airfoil < 8 or self.panels_per_airfoil % 2:
            raise ValueError("panels_per_airfoil must be even and >= 8")
        if not self.Re > 0.0:
            raise ValueError("Re must be positive")
        if self.coeffs_per_surface < 4:
            raise ValueError("coeffs_per_surface must be >= 4")

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls) if f.name != "pipeline"]


@dataclass(frozen=True)
class Individual:
    genome: BsplineGenome
    fitness: Optional[float] = None
    cl: Optional[float] = None
    cd: Optional[float] = None
    penalized: bool = False

    @property
    def evaluated(self) -> bool:
        return self.fitness is not None


@dataclass
class GenerationLog:
    generation: int
    best_fitness: float
    median_fitness: float
    best: Individual
    penalized: int
    timing: TimingReport


def _problem(genome: BsplineGenome, config: GaConfig) -> Problem:
    return Problem(genome, FlowCondition(0.0), config.Re, config.panels_per_airfoil)


def score(result: ProblemResult, config: GaConfig) -> tuple[float, bool]:
    """Fitness from a batch result; returns (fitness, penalized)."""
    if not result.ok or result.drag is None:
        return config.invalid_fitness_penalty, True
    drag = result.drag
    early = [x for x in (drag.x_sep_upper, drag.x_sep_lower) if x is not None and x < config.min_separation_x]
    if early or not drag.cd > 0.0 or not np.isfinite(result.cl):
        return config.invalid_fitness_penalty, True
    return result.cl / drag.cd, False


def _with_result(ind: Individual, result: ProblemResult, config: GaConfig) -> Individual:
    fit, bad = score(result, config)
    cl = result.cl if result.ok else None
    cd = result.cd if result.drag is not None else None
    return replace(ind, fitness=float(fit), cl=cl, cd=cd, penalized=bad)


def fitness(individual: Individual, config: GaConfig) -> float:
    """Cl/Cd at zero incidence, or the penalty for unusable shapes."""
    return score(evaluate_problem(_problem(individual.genome, config)), config)[0]


def tournament_select(population, k: int, rng: np.random.Generator) -> Individual:
    """Best of ``k`` uniform draws with replacement; the first drawn wins ties."""
    draws = rng.integers(0, len(population), size=k)
    best = population[draws[0]]
    for i in draws[1:]:
        if population[i].fitness > best.fitness:
            best = population[i]
    return best


def one_point_crossover(a: Individual, b: Individual, rng: np.random.Generator, cut: Optional[int] = None):
    """Swap the tails of the concatenated (upper, lower) coefficient vectors."""
    if a.genome.shape != b.genome.shape:
        raise ShapeMismatch(f"genome shapes differ: {a.genome.shape} vs {b.genome.shape}")
    fa, fb = a.genome.flat(), b.genome.flat()
    if cut is None:
        cut = int(rng.integers(0, fa.size))
    c1 = np.concatenate([fa[:cut], fb[cut:]])
    c2 = np.concatenate([fb[:cut], fa[cut:]])
    shape = a.genome.shape
    return Individual(BsplineGenome.from_flat(c1, shape)), Individual(BsplineGenome.from_flat(c2, shape))


def mutate(individual: Individual, config: GaConfig, rng: np.random.Generator) -> Individual:
    """Perturb one free coefficient with probability ``mutation_rate``."""
    if rng.random() >= config.mutation_rate:
        return individual
    genome = individual.genome
    free = np.flatnonzero(~genome.pinned_mask())
    i = free[rng.integers(0, free.size)]
    flat = genome.flat()
    flat[i] += rng.normal(0.0, config.mutation_sigma)
    return Individual(BsplineGenome.from_flat(flat, genome.shape))


def base_genome(config: GaConfig) -> BsplineGenome:
    """Symmetric starting shape: a least-squares fit of NACA 0012, made exactly symmetric."""
    fit = fit_bspline(naca4("0012", 200), config.coeffs_per_surface)
    upper = fit.upper_coeffs
    return BsplineGenome(upper, tuple(-c for c in upper))


def initial_population(config: GaConfig, rng: np.random.Generator) -> list[Individual]:
    base = base_genome(config)
    flat = base.flat()
    free = ~base.pinned_mask()
    pop = []
    for _ in range(config.population_size):
        jitter = rng.normal(0.0, config.init_jitter, size=flat.size)
        pop.append(Individual(BsplineGenome.from_flat(np.where(free, flat + jitter, flat), base.shape)))
    return pop


def evaluate_population(population: list[Individual], config: GaConfig):
    """Score every unevaluated individual as one pipelined batch."""
    todo = [i for i, ind in enumerate(population) if not ind.evaluated]
    out = list(population)
    if not todo:
        return out, TimingReport("pipelined", 0.0, 0.0, 0.0)
    workload = Workload([_problem(population[i].genome, config) for i in todo])
    results, report = run_pipelined(workload, config.pipeline)
    for i, res in zip(todo, results):
        out[i] = _with_result(population[i], res, config)
    return out, report


def _rank(population):
    # stable: earlier individuals win ties
    return sorted(population, key=lambda ind: -ind.fitness)


def evolve(config: GaConfig, progress=None):
    """Generational GA with elitism. Returns the best individual and one log per generation."""
    rng = np.random.default_rng(config.rng_seed)
    population = initial_population(config, rng)
    logs: list[GenerationLog] = []
    best: Optional[Individual] = None
    for gen in range(config.generations):
        population, report = evaluate_population(population, config)
        ranked = _rank(population)
        if best is None or ranked[0].fitness > best.fitness:
            best = ranked[0]
        log = GenerationLog(
            gen,
            ranked[0].fitness,
            statistics.median(ind.fitness for ind in population),
            ranked[0],
            sum(ind.penalized for ind in population),
            report,
        )
        logs.append(log)
        if progress is not None:
            progress(log)
        if gen == config.generations - 1:
            break
        nxt = ranked[: config.elite_count]
        while len(nxt) < config.population_size:
            p1 = tournament_select(population, config.tournament_size, rng)
            p2 = tournament_select(population, config.tournament_size, rng)
            for child in one_point_crossover(p1, p2, rng):
                nxt.append(mutate(child, config, rng))
        population = nxt[: config.population_size]
    return best, logs


def _genome_text(genome: BsplineGenome) -> str:
    return " ".join(f"{c:.9g}" for c in genome.flat())


def generation_log_csv(logs) -> str:
    out = io.StringIO()
    out.write(",".join(GENERATION_LOG_COLUMNS) + "\n")
    for log in logs:
        b = log.best
        cl = "" if b.cl is None else f"{b.cl:.9g}"
        cd = "" if b.cd is None else f"{b.cd:.9g}"
        out.write(
            f"{log.generation},{log.best_fitness:.9g},{log.median_fitness:.9g},{cl},{cd},{log.penalized},{_genome_text(b.genome)}\n"
        )
    return out.getvalue()

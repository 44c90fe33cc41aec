from collections import Counter
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from panelopt.batch_pipeline import PipelineConfig
from panelopt.errors import ShapeMismatch
from panelopt.geometry import BsplineGenome, fit_bspline, from_bspline, naca4, symmetric_genome
from panelopt.optimizer import (
    GENERATION_LOG_COLUMNS,
    GaConfig,
    Individual,
    base_genome,
    evolve,
    fitness,
    generation_log_csv,
    initial_population,
    mutate,
    one_point_crossover,
    tournament_select,
)

SMALL = GaConfig(population_size=12, generations=3, panels_per_airfoil=60, rng_seed=3,
                 pipeline=PipelineConfig(num_slices=3))


def pop_with_fitness(values):
    g = symmetric_genome([0.05, 0.06, 0.04], 5)
    return [Individual(g, fitness=float(v), cl=0.0, cd=0.01) for v in values]


def genome_pair(seed):
    rng = np.random.default_rng(seed)
    a = BsplineGenome.from_flat(rng.normal(size=12), (6, 6))
    b = BsplineGenome.from_flat(rng.normal(size=12), (6, 6))
    return Individual(a), Individual(b)


# -- selection ----------------------------------------------------------------------


def test_tournament_full_coverage_returns_best():
    pop = pop_with_fitness([3, 9, 1, 4])
    rng = np.random.default_rng(0)
    for _ in range(50):
        draws = np.random.default_rng(rng.integers(1 << 30))
        pick = tournament_select(pop, 64, draws)
        assert pick.fitness == 9.0


def test_tournament_ties_first_drawn_wins():
    g = [symmetric_genome([0.05 + 0.001 * i, 0.05], 4) for i in range(5)]
    pop = [Individual(gi, fitness=1.0) for gi in g]
    rng = np.random.default_rng(42)
    pick = tournament_select(pop, 3, rng)
    first = np.random.default_rng(42).integers(0, 5, size=3)[0]
    assert pick is pop[first]


def test_tournament_deterministic():
    pop = pop_with_fitness(np.arange(20) % 7)
    a = [tournament_select(pop, 3, r) for r in [np.random.default_rng(8)] * 30]
    b = [tournament_select(pop, 3, r) for r in [np.random.default_rng(8)] * 30]
    assert [id(x) for x in a] == [id(x) for x in b]


def test_tournament_never_worse_than_uniform_pick():
    pop = pop_with_fitness(range(10))
    rng = np.random.default_rng(1)
    picks = [tournament_select(pop, 3, rng).fitness for _ in range(2000)]
    # expected maximum of 3 uniform draws over 0..9 is about 6.7
    assert 6.3 < np.mean(picks) < 7.1


# -- crossover --------------------------------------------------------------------


def test_crossover_identical_parents():
    a, _ = genome_pair(0)
    c1, c2 = one_point_crossover(a, a, np.random.default_rng(1))
    assert c1.genome == a.genome and c2.genome == a.genome


def test_crossover_cut_zero_swaps():
    a, b = genome_pair(1)
    c1, c2 = one_point_crossover(a, b, None, cut=0)
    assert c1.genome == b.genome and c2.genome == a.genome


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_crossover_conserves_coefficients(seed):
    a, b = genome_pair(seed)
    c1, c2 = one_point_crossover(a, b, np.random.default_rng(seed))
    before = Counter(np.concatenate([a.genome.flat(), b.genome.flat()]).tolist())
    after = Counter(np.concatenate([c1.genome.flat(), c2.genome.flat()]).tolist())
    assert before == after
    for c in (c1, c2):
        assert c.genome.upper_coeffs[0] == c.genome.lower_coeffs[-1] == 0.0
        assert not c.evaluated


def test_crossover_shape_mismatch():
    a, _ = genome_pair(2)
    b = Individual(symmetric_genome([0.05, 0.05], 4))
    with pytest.raises(ShapeMismatch):
        one_point_crossover(a, b, np.random.default_rng(0))


# -- mutation ----------------------------------------------------------------------


def test_mutation_rate_zero_is_identity():
    cfg = replace(SMALL, mutation_rate=0.0)
    a, _ = genome_pair(3)
    rng = np.random.default_rng(0)
    assert all(mutate(a, cfg, rng) is a for _ in range(100))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mutation_changes_at_most_one_free_coefficient(seed):
    a, _ = genome_pair(seed % 1000)
    child = mutate(a, SMALL, np.random.default_rng(seed))
    diff = np.flatnonzero(child.genome.flat() != a.genome.flat())
    assert diff.size <= 1
    assert not np.any(a.genome.pinned_mask()[diff])


def test_mutation_rate_respected():
    cfg = replace(SMALL, mutation_rate=0.9, mutation_sigma=0.05)
    a, _ = genome_pair(4)
    rng = np.random.default_rng(5)
    changed = sum(mutate(a, cfg, rng) is not a for _ in range(4000))
    assert 0.88 < changed / 4000 < 0.92


# -- fitness -------------------------------------------------------------------------


def test_invalid_genome_gets_penalty():
    g = BsplineGenome((0.0,) * 6, (0.0,) * 6)
    assert fitness(Individual(g), SMALL) == SMALL.invalid_fitness_penalty


def test_symmetric_genome_fitness_near_zero():
    cfg = replace(SMALL, panels_per_airfoil=200)
    f_sym = fitness(Individual(base_genome(cfg)), cfg)
    f_cam = fitness(Individual(fit_bspline(naca4("2412", 200), 10)), cfg)
    assert abs(f_sym) < 0.5
    assert f_cam > f_sym


def test_naca2412_fit_has_positive_fitness():
    cfg = replace(SMALL, panels_per_airfoil=200)
    assert fitness(Individual(fit_bspline(naca4("2412", 200), 10)), cfg) > 0.0


def test_base_genome_symmetric_and_valid():
    g = base_genome(SMALL)
    assert g.upper_coeffs == tuple(-c for c in g.lower_coeffs)
    from_bspline(g, 100)


def test_initial_population_reproducible():
    a = initial_population(SMALL, np.random.default_rng(9))
    b = initial_population(SMALL, np.random.default_rng(9))
    assert [x.genome for x in a] == [x.genome for x in b]
    assert len({x.genome for x in a}) == SMALL.population_size


# -- evolution -----------------------------------------------------------------------


def test_evolve_monotone_and_population_constant():
    seen = []
    best, logs = evolve(SMALL, progress=seen.append)
    assert len(logs) == SMALL.generations == len(seen)
    fits = [g.best_fitness for g in logs]
    assert all(b >= a for a, b in zip(fits, fits[1:]))
    assert best.fitness == max(fits)
    assert all(g.timing.W > 0 for g in logs[1:])


def test_evolve_deterministic_across_worker_counts():
    _, a = evolve(SMALL)
    other = replace(SMALL, pipeline=PipelineConfig(num_slices=5, assembly_workers=3, solver_workers=2))
    _, b = evolve(other)
    assert generation_log_csv(a) == generation_log_csv(b)


def test_generation_log_csv():
    _, logs = evolve(replace(SMALL, generations=2))
    lines = generation_log_csv(logs).splitlines()
    assert lines[0] == ",".join(GENERATION_LOG_COLUMNS)
    assert len(lines) == 3
    assert lines[1].startswith("0,")
    assert len(lines[1].split(",")[-1].split()) == 2 * SMALL.coeffs_per_surface


@pytest.mark.parametrize(
    "kwargs",
    [
        {"population_size": 2},
        {"population_size": 4, "elite_count": 4},
        {"tournament_size": 1},
        {"generations": 0},
        {"mutation_rate": 1.5},
        {"panels_per_airfoil": 101},
        {"Re": 0.0},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        GaConfig(**kwargs)

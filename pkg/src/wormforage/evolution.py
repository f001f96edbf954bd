"""Population management: regularized fitness, selection, crossover, mutation.

Selection currency is the regularized fitness (raw episode fitness minus a
supralinear penalty on the number of weights changed from the prior), so the
population is pulled toward sparse edits unless performance pays for them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from wormforage.connectome import Genome


@dataclass(frozen=True)
class EvoConfig:
    population_size: int = 64
    reg_lambda: float = 0.1
    reg_exponent: float = 1.3
    mutations_per_offspring: int = 5
    mutation_low: float = -20.0
    mutation_high: float = 20.0
    cull_fraction: float = 0.5

    def __post_init__(self) -> None:
        if self.population_size < 2 or self.population_size % 2:
            raise ValueError(f"population_size must be even and >= 2, got {self.population_size}")
        if not self.mutation_low < self.mutation_high:
            raise ValueError("mutation_low must be < mutation_high")
        if self.reg_lambda < 0 or self.reg_exponent <= 0:
            raise ValueError("need reg_lambda >= 0 and reg_exponent > 0")
        if not 0 < self.cull_fraction < 1:
            raise ValueError("cull_fraction must be in (0, 1)")
        if self.mutations_per_offspring < 0:
            raise ValueError("mutations_per_offspring must be >= 0")


@dataclass
class Individual:
    """One population member; fitness fields are None while stale (unevaluated)."""

    genome: Genome
    raw_fitness: float | None = None
    reg_fitness: float | None = None
    food_eaten: int | None = None
    parents: tuple[int, int] | None = None  # survivor indices within the new population

    @property
    def is_stale(self) -> bool:
        return self.raw_fitness is None


def regularizer(genome: Genome, cfg: EvoConfig) -> float:
    """-lambda * |changed coordinates|^exponent (supralinear, so merging two
    edit sets is penalized more than the sum of the parts)."""
    return -cfg.reg_lambda * len(genome.dirty) ** cfg.reg_exponent


def _shifted(fitnesses: np.ndarray) -> np.ndarray:
    # Fitness-proportional selection is undefined for non-positive values,
    # which the regularizer produces early on; shift only when needed so the
    # plain ratio semantics hold for all-positive populations.
    low = fitnesses.min()
    if low <= 0:
        return fitnesses - low + 1e-9
    return fitnesses


def selection_probabilities(pop: list[Individual]) -> np.ndarray:
    """Probabilities proportional to (shifted) regularized fitness; sum to 1."""
    if not pop:
        raise ValueError("empty population")
    for k, ind in enumerate(pop):
        if ind.reg_fitness is None:
            raise ValueError(f"stale individual at index {k}")
    f = _shifted(np.array([ind.reg_fitness for ind in pop], dtype=np.float64))
    return f / f.sum()


def crossover(
    parent1: Individual,
    parent2: Individual,
    rng_seed: int,
    p1: float | None = None,
    p2: float | None = None,
) -> Genome:
    """Per-gene binary mix: each coordinate comes from parent1 with probability
    p1/(p1+p2), else from parent2. Defaults derive p1, p2 from the parents'
    regularized fitnesses with the same shift rule selection uses."""
    g1, g2 = parent1.genome, parent2.genome
    if len(g1) != len(g2):
        raise ValueError(f"genome lengths differ: {len(g1)} vs {len(g2)}")
    if g1.prior is not g2.prior and not np.array_equal(g1.prior, g2.prior):
        raise ValueError("parents share no common prior")
    if (p1 is None) != (p2 is None):
        raise ValueError("pass both p1 and p2 or neither")
    if p1 is None:
        if parent1.reg_fitness is None or parent2.reg_fitness is None:
            raise ValueError("stale parent fitness")
        p1, p2 = _shifted(np.array([parent1.reg_fitness, parent2.reg_fitness]))
    if p1 < 0 or p2 < 0 or p1 + p2 <= 0:
        raise ValueError(f"invalid parent weights ({p1}, {p2})")
    p_c = p1 / (p1 + p2)
    rng = np.random.default_rng(rng_seed)
    take_first = rng.random(len(g1)) < p_c
    weights = np.where(take_first, g1.weights, g2.weights)
    candidates = g1.dirty | g2.dirty
    dirty = frozenset(i for i in candidates if weights[i] != g1.prior[i])
    weights.setflags(write=False)
    return Genome(weights, g1.prior, dirty)


def mutate(genome: Genome, count: int, cfg: EvoConfig, rng_seed: int) -> Genome:
    """Replace `count` distinct uniformly chosen coordinates with fresh draws
    from U(mutation_low, mutation_high)."""
    if count < 0 or count > len(genome):
        raise ValueError(f"count must be in [0, {len(genome)}], got {count}")
    if count == 0:
        return genome
    rng = np.random.default_rng(rng_seed)
    idx = rng.choice(len(genome), size=count, replace=False)
    vals = rng.uniform(cfg.mutation_low, cfg.mutation_high, size=count)
    return genome.with_values(idx, vals)


def next_generation(pop: list[Individual], cfg: EvoConfig, rng_seed: int) -> list[Individual]:
    """Cull the bottom half (ties keep the lower index), refill by crossover.

    Survivors keep their evaluated fitness (elitism through survival); all
    offspring are stale and must be evaluated before the next selection.
    """
    n = cfg.population_size
    if len(pop) != n:
        raise ValueError(f"population size {len(pop)} != configured {n}")
    for k, ind in enumerate(pop):
        if ind.reg_fitness is None:
            raise ValueError(f"stale individual at index {k}")
    n_survivors = math.ceil(n * (1.0 - cfg.cull_fraction))
    if n_survivors < 2:
        raise ValueError(
            f"crossover needs two distinct parents, but culling leaves {n_survivors} survivor(s)"
        )
    order = sorted(range(n), key=lambda i: (-pop[i].reg_fitness, i))
    survivors = [pop[i] for i in order[:n_survivors]]
    probs = selection_probabilities(survivors)
    rng = np.random.default_rng(rng_seed)
    out = list(survivors)
    indices = np.arange(n_survivors)
    while len(out) < n:
        i = int(rng.choice(n_survivors, p=probs))
        # Parents must be distinct (self-crossover is a no-op), so the second
        # parent follows p conditioned on j != i. Sampling that renormalized
        # distribution directly is equivalent to redrawing on collision but
        # cannot stall when the off-i mass is vanishingly small.
        rest = np.delete(indices, i)
        rest_p = probs[rest]
        total = float(rest_p.sum())
        if total > 0.0:
            j = int(rng.choice(rest, p=rest_p / total))
        else:  # remaining mass underflowed to zero: fall back to uniform
            j = int(rng.choice(rest))
        child_seed = int(rng.integers(0, 2**63))
        child = crossover(survivors[i], survivors[j], child_seed, p1=float(probs[i]), p2=float(probs[j]))
        out.append(Individual(genome=child, parents=(i, j)))
    return out

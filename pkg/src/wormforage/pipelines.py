"""Training pipelines: two hybrid variants, three baselines, one train loop.

All five strategies expose a uniform per-generation step over a shared
TrainState and consume fitness evaluations only through the counting evaluator
passed in (single entry point, so evaluation budgets are auditable).

Seed discipline: every stochastic choice draws from a generator derived as
SeedSequence([master_seed, purpose, generation, member]), so runs are
reproducible bit-for-bit and subsequences are independent across purposes.
The episode seed (initial heading) is the master seed itself, fixed for the
whole run so the inner optimizer sees a deterministic objective.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Iterator

import numpy as np

from wormforage.connectome import Connectome, Genome
from wormforage.environment import EnvConfig, MotorParams, run_episode
from wormforage.evolution import EvoConfig, Individual, mutate, next_generation, regularizer
from wormforage.mads import MadsConfig, run_mads
from wormforage.neural_sim import SimParams

# Seed-derivation purposes (never reuse a code for a new stream).
PURPOSE_SUBSET = 1
PURPOSE_MUTATION = 2
PURPOSE_MADS = 3
PURPOSE_NEXT_GENERATION = 4
PURPOSE_ES = 5
PURPOSE_INIT = 6

INIT_MODES = ("biological_prior", "random_uniform")


def derive_seed(master: int, purpose: int, *parts: int) -> int:
    """Independent 64-bit stream seed for (master, purpose, *parts)."""
    ss = np.random.SeedSequence([master, purpose, *parts])
    return int(ss.generate_state(1, np.uint64)[0])


def derive_rng(master: int, purpose: int, *parts: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master, purpose, *parts]))


class PipelineKind(str, Enum):
    RENOMAD = "renomad"
    MENOMAD = "menomad"
    PURE_EVO = "pure_evo"
    OPENAI_ES = "openai_es"
    CFNOMAD = "cfnomad"


@dataclass(frozen=True)
class EsConfig:
    sigma: float = 0.5
    learning_rate: float = 0.05
    pop_pairs: int = 16

    def __post_init__(self) -> None:
        if self.sigma <= 0 or self.learning_rate <= 0 or self.pop_pairs < 1:
            raise ValueError("sigma and learning_rate must be > 0, pop_pairs >= 1")


@dataclass(frozen=True)
class PipelineTuning:
    renomad_subset_size: int = 49
    mads_dirty_cap: int = 50  # skip the inner search at or above this many changes
    cfnomad_mutation_period: int = 4
    cfnomad_mutations: int = 2

    def __post_init__(self) -> None:
        if self.renomad_subset_size < 1:
            raise ValueError("renomad_subset_size must be >= 1")
        if self.mads_dirty_cap < 0:
            raise ValueError("mads_dirty_cap must be >= 0")
        if self.cfnomad_mutation_period < 1 or self.cfnomad_mutations < 1:
            raise ValueError("cfnomad cadence fields must be >= 1")


@dataclass(frozen=True)
class TrainBudget:
    """Exactly one of generations / wall_clock_s / evaluations must be set."""

    generations: int | None = None
    wall_clock_s: float | None = None
    evaluations: int | None = None

    def __post_init__(self) -> None:
        set_fields = [
            f for f in (self.generations, self.wall_clock_s, self.evaluations) if f is not None
        ]
        if len(set_fields) != 1:
            raise ValueError("set exactly one of generations, wall_clock_s, evaluations")
        if set_fields[0] < 0:
            raise ValueError("budget must be >= 0")


@dataclass(frozen=True)
class RunConfig:
    """Everything one training run needs besides the pipeline kind and budget."""

    conn: Connectome
    master_seed: int
    env: EnvConfig = EnvConfig()
    sim: SimParams = SimParams()
    motor: MotorParams = MotorParams()
    evo: EvoConfig = EvoConfig()
    mads: MadsConfig = MadsConfig()
    es: EsConfig = EsConfig()
    tuning: PipelineTuning = PipelineTuning()
    init_mode: str = "biological_prior"

    def __post_init__(self) -> None:
        if self.master_seed < 0:
            raise ValueError("master_seed must be >= 0")
        if self.init_mode not in INIT_MODES:
            raise ValueError(f"init_mode must be one of {INIT_MODES}")


@dataclass(frozen=True)
class EvalOutcome:
    raw_fitness: float
    food_eaten: int


class CountingEvaluator:
    """Wraps the fitness function; every pipeline evaluation passes through here."""

    def __init__(self, fn: Callable[[Genome], EvalOutcome]):
        self._fn = fn
        self.count = 0

    def __call__(self, genome: Genome) -> EvalOutcome:
        self.count += 1
        return self._fn(genome)


def make_episode_evaluator(cfg: RunConfig) -> Callable[[Genome], EvalOutcome]:
    """Fitness = one foraging episode on the run's task with the run's seed."""
    task_seed = cfg.master_seed

    def fn(genome: Genome) -> EvalOutcome:
        res = run_episode(genome, cfg.conn, cfg.env, cfg.sim, task_seed, cfg.motor)
        return EvalOutcome(res.fitness, res.food_eaten)

    return fn


@dataclass(frozen=True)
class GenMetrics:
    best_fitness: float
    mean_fitness: float
    food_eaten_best: int
    l2_best: float
    l0_best: int


@dataclass(frozen=True)
class RunRecord:
    """Per-generation benchmark row; best_* columns describe the best genome
    found so far (by regularized fitness), mean_fitness the evaluated pool."""

    generation: int
    wall_clock_s: float
    best_fitness: float
    mean_fitness: float
    food_eaten_best: int
    l2_best: float
    l0_best: int
    evaluations_cumulative: int

    # Column order for CSV export.
    FIELDS = (
        "generation",
        "wall_clock_s",
        "best_fitness",
        "mean_fitness",
        "food_eaten_best",
        "l2_best",
        "l0_best",
        "evaluations_cumulative",
    )


@dataclass
class TrainState:
    population: list[Individual]
    generation: int
    best_ever: Individual
    master_seed: int
    evaluations: int = 0
    mutated_coords: int = 0
    crossover_calls: int = 0
    mads_calls: int = 0
    last_mean_fitness: float = 0.0


def _genome_metrics(genome: Genome) -> tuple[float, int]:
    delta = genome.weights - genome.prior
    return float(np.linalg.norm(delta)), int(np.count_nonzero(delta))


def _evaluated(
    genome: Genome, evaluate: CountingEvaluator, evo: EvoConfig, regularized: bool
) -> Individual:
    out = evaluate(genome)
    reg = out.raw_fitness + (regularizer(genome, evo) if regularized else 0.0)
    return Individual(genome, out.raw_fitness, reg, out.food_eaten)


def _consider_best(state: TrainState, ind: Individual) -> None:
    if ind.reg_fitness > state.best_ever.reg_fitness:
        state.best_ever = ind


def initial_genome(cfg: RunConfig) -> Genome:
    """The search prior: the connectome weights, or (for random_uniform mode) a
    uniform draw over the mutation bounds which then becomes its own prior, so
    distances and the regularizer measure deviation from the initialization."""
    if cfg.init_mode == "biological_prior":
        return Genome.from_prior(cfg.conn)
    rng = derive_rng(cfg.master_seed, PURPOSE_INIT)
    w = rng.uniform(cfg.evo.mutation_low, cfg.evo.mutation_high, size=cfg.conn.n_synapses)
    w.setflags(write=False)
    return Genome(w, w, frozenset())


def init_state(kind: PipelineKind, cfg: RunConfig, evaluate: CountingEvaluator) -> TrainState:
    """Generation-0 state: identical copies of the prior share one evaluation."""
    g0 = initial_genome(cfg)
    regularized = kind is not PipelineKind.OPENAI_ES
    first = _evaluated(g0, evaluate, cfg.evo, regularized)
    if kind in (PipelineKind.OPENAI_ES, PipelineKind.CFNOMAD):
        population = [first]
    else:
        population = [replace(first) for _ in range(cfg.evo.population_size)]
    state = TrainState(
        population=population,
        generation=0,
        best_ever=first,
        master_seed=cfg.master_seed,
        last_mean_fitness=first.raw_fitness,
    )
    state.evaluations = evaluate.count
    return state


def _mads_objective(
    evaluate: CountingEvaluator, evo: EvoConfig
) -> Callable[[Genome], float]:
    def objective(genome: Genome) -> float:
        return evaluate(genome).raw_fitness + regularizer(genome, evo)

    return objective


def _refine_with_mads(
    state: TrainState,
    cfg: RunConfig,
    evaluate: CountingEvaluator,
    cand: Individual,
    subset: list[int],
    member: int,
) -> Individual:
    """Run the inner search from an evaluated candidate; re-evaluate on change."""
    res = run_mads(
        cand.genome,
        subset,
        _mads_objective(evaluate, cfg.evo),
        cfg.mads,
        derive_seed(state.master_seed, PURPOSE_MADS, state.generation, member),
        initial_score=cand.reg_fitness,
    )
    state.mads_calls += 1
    if np.array_equal(res.genome.weights, cand.genome.weights):
        return cand
    return _evaluated(res.genome, evaluate, cfg.evo, regularized=True)


def _population_generation(
    state: TrainState,
    cfg: RunConfig,
    evaluate: CountingEvaluator,
    *,
    mutations: int,
    subset_mode: str,  # "random" | "dirty" | "none"
) -> TrainState:
    """Shared body of renomad / menomad / pure_evo.

    Per member: optional mutation, evaluation, optional inner search on a
    coordinate subset; then culling + crossover refill. Mutation invalidates
    stored fitness, so candidates are (re)evaluated exactly when needed.
    """
    g = state.generation
    m = state.master_seed
    pool: list[Individual] = []
    for idx, ind in enumerate(state.population):
        genome = ind.genome
        if mutations > 0:
            count = min(mutations, len(genome))
            genome = mutate(genome, count, cfg.evo, derive_seed(m, PURPOSE_MUTATION, g, idx))
            state.mutated_coords += count
        if mutations > 0 or ind.is_stale:
            cand = _evaluated(genome, evaluate, cfg.evo, regularized=True)
        else:
            cand = ind  # unchanged genome: its stored score is this task's value
        subset: list[int] | None = None
        if subset_mode == "random":
            size = min(cfg.tuning.renomad_subset_size, cfg.mads.max_subset, len(genome))
            rng = derive_rng(m, PURPOSE_SUBSET, g, idx)
            subset = sorted(int(i) for i in rng.choice(len(genome), size=size, replace=False))
        elif subset_mode == "dirty":
            if 0 < len(genome.dirty) < cfg.tuning.mads_dirty_cap:
                subset = sorted(genome.dirty)
        if subset:
            cand = _refine_with_mads(state, cfg, evaluate, cand, subset, idx)
        _consider_best(state, cand)
        pool.append(cand)

    new_pop = next_generation(pool, cfg.evo, derive_seed(m, PURPOSE_NEXT_GENERATION, g))
    state.crossover_calls += sum(1 for ind in new_pop if ind.is_stale)
    state.population = new_pop
    state.generation = g + 1
    state.evaluations = evaluate.count
    state.last_mean_fitness = float(np.mean([ind.raw_fitness for ind in pool]))
    return state


def renomad_generation(state: TrainState, cfg: RunConfig, evaluate: CountingEvaluator) -> TrainState:
    """Inner search on an independent random coordinate subset per member; no mutation."""
    return _population_generation(state, cfg, evaluate, mutations=0, subset_mode="random")


def menomad_generation(state: TrainState, cfg: RunConfig, evaluate: CountingEvaluator) -> TrainState:
    """Mutate every member, then inner search on its accumulated changed
    coordinates while they number under the cap; skip the search otherwise."""
    return _population_generation(
        state, cfg, evaluate, mutations=cfg.evo.mutations_per_offspring, subset_mode="dirty"
    )


def pure_evo_generation(state: TrainState, cfg: RunConfig, evaluate: CountingEvaluator) -> TrainState:
    """Mutation + crossover + culling only — menomad with the inner search off."""
    return _population_generation(
        state, cfg, evaluate, mutations=cfg.evo.mutations_per_offspring, subset_mode="none"
    )


def cfnomad_generation(state: TrainState, cfg: RunConfig, evaluate: CountingEvaluator) -> TrainState:
    """Single-lineage elitist control: two mutations every Nth generation paired
    with an inner search over all accumulated changes; a fresh poll of the same
    coordinates in between; no crossover ever."""
    g = state.generation
    incumbent = state.population[0]
    genome = incumbent.genome
    if g % cfg.tuning.cfnomad_mutation_period == 0:
        count = min(cfg.tuning.cfnomad_mutations, len(genome))
        genome = mutate(genome, count, cfg.evo, derive_seed(state.master_seed, PURPOSE_MUTATION, g, 0))
        state.mutated_coords += count
        cand = _evaluated(genome, evaluate, cfg.evo, regularized=True)
    else:
        cand = incumbent
    if 0 < len(genome.dirty) < cfg.tuning.mads_dirty_cap:
        cand = _refine_with_mads(state, cfg, evaluate, cand, sorted(genome.dirty), 0)
    if cand.reg_fitness > incumbent.reg_fitness:
        incumbent = cand
    _consider_best(state, incumbent)
    state.population = [incumbent]
    state.generation = g + 1
    state.evaluations = evaluate.count
    state.last_mean_fitness = incumbent.raw_fitness
    return state


def openai_es_generation(state: TrainState, cfg: RunConfig, evaluate: CountingEvaluator) -> TrainState:
    """Antithetic Gaussian perturbations around a single center, centered-rank
    shaping, natural-gradient-style step. Exempt from the regularizer (its
    update touches every coordinate, so a change-count penalty is meaningless)."""
    from scipy.stats import rankdata

    center = state.population[0]
    sigma, lr, pairs = cfg.es.sigma, cfg.es.learning_rate, cfg.es.pop_pairs
    rng = derive_rng(state.master_seed, PURPOSE_ES, state.generation)
    eps = rng.standard_normal((pairs, len(center.genome)))
    prior = center.genome.prior
    scores = np.empty(2 * pairs, dtype=np.float64)
    for i in range(pairs):
        plus = center.genome.weights + sigma * eps[i]
        scores[i] = evaluate(Genome.from_weights(plus, prior)).raw_fitness
    for i in range(pairs):
        minus = center.genome.weights - sigma * eps[i]
        scores[pairs + i] = evaluate(Genome.from_weights(minus, prior)).raw_fitness
    # Centered ranks in [-0.5, 0.5]; ties share averaged ranks, so an all-tied
    # sweep yields exactly zero utilities and a zero update.
    ranks = rankdata(scores, method="average")
    utils = (ranks - 1.0) / (2.0 * pairs - 1.0) - 0.5
    signed = np.vstack([eps, -eps])
    step = (lr / (pairs * sigma)) * (utils @ signed)
    new_center = Genome.from_weights(center.genome.weights + step, prior)
    cand = _evaluated(new_center, evaluate, cfg.evo, regularized=False)
    _consider_best(state, cand)
    state.population = [cand]
    state.generation += 1
    state.evaluations = evaluate.count
    state.last_mean_fitness = cand.raw_fitness
    return state


_GENERATION_STEPS = {
    PipelineKind.RENOMAD: renomad_generation,
    PipelineKind.MENOMAD: menomad_generation,
    PipelineKind.PURE_EVO: pure_evo_generation,
    PipelineKind.OPENAI_ES: openai_es_generation,
    PipelineKind.CFNOMAD: cfnomad_generation,
}


def step_generation(
    kind: PipelineKind, state: TrainState, cfg: RunConfig, evaluate: CountingEvaluator
) -> TrainState:
    return _GENERATION_STEPS[PipelineKind(kind)](state, cfg, evaluate)


def _metrics(state: TrainState) -> GenMetrics:
    best = state.best_ever
    l2, l0 = _genome_metrics(best.genome)
    return GenMetrics(
        best_fitness=best.raw_fitness,
        mean_fitness=state.last_mean_fitness,
        food_eaten_best=best.food_eaten if best.food_eaten is not None else 0,
        l2_best=l2,
        l0_best=l0,
    )


@dataclass(frozen=True)
class TrainResult:
    records: list[RunRecord]
    state: TrainState
    best: Individual


def train_iter(
    kind: PipelineKind,
    cfg: RunConfig,
    budget: TrainBudget,
    evaluate_fn: Callable[[Genome], EvalOutcome] | None = None,
) -> Iterator[tuple[TrainState, RunRecord]]:
    """Run generations until the budget is exhausted, yielding after each one.

    Wall-clock budgets stop within one generation of the deadline; evaluation
    budgets stop at the end of the generation that crosses the cap.
    """
    kind = PipelineKind(kind)
    evaluator = CountingEvaluator(evaluate_fn or make_episode_evaluator(cfg))
    state = init_state(kind, cfg, evaluator)
    start = time.perf_counter()

    def exhausted() -> bool:
        if budget.generations is not None:
            return state.generation >= budget.generations
        if budget.evaluations is not None:
            return state.evaluations >= budget.evaluations
        return time.perf_counter() - start >= budget.wall_clock_s

    while not exhausted():
        state = step_generation(kind, state, cfg, evaluator)
        met = _metrics(state)
        record = RunRecord(
            generation=state.generation,
            wall_clock_s=time.perf_counter() - start,
            best_fitness=met.best_fitness,
            mean_fitness=met.mean_fitness,
            food_eaten_best=met.food_eaten_best,
            l2_best=met.l2_best,
            l0_best=met.l0_best,
            evaluations_cumulative=state.evaluations,
        )
        yield state, record


def train(
    kind: PipelineKind,
    cfg: RunConfig,
    budget: TrainBudget,
    evaluate_fn: Callable[[Genome], EvalOutcome] | None = None,
) -> TrainResult:
    """Full training run; returns all records plus the best individual found.

    A zero budget returns no records and the unmodified prior as best.
    """
    records = []
    state = None
    for state, record in train_iter(kind, cfg, budget, evaluate_fn):
        records.append(record)
    if state is None:  # zero budget: build the initial state for the result
        evaluator = CountingEvaluator(evaluate_fn or make_episode_evaluator(cfg))
        state = init_state(PipelineKind(kind), cfg, evaluator)
    return TrainResult(records=records, state=state, best=state.best_ever)

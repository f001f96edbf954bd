"""Mesh-adaptive direct search over a small subset of genome coordinates.

Self-contained maximizer treating the objective as a black box: each iteration
polls the incumbent along a randomized orthogonal basis and its negation
(2*dimension points) scaled to the current mesh, accepts the best improving
point (argmax, ties by lowest point index, independent of evaluation order),
and rescales the mesh.

Two mesh polarities are supported. `refine_on_success` refines (shrinks) the
mesh after an improvement and coarsens after a failed poll — suited to
plateau-heavy objectives where failure means the step was too small to change
anything. `refine_on_failure` holds the mesh after an improvement and refines
after a failure — the usual direct-search step control, required for
long-range convergence on smooth objectives (under `refine_on_success`,
successive improvements shrink the step geometrically, bounding total travel
near the start point; a reciprocal grow-on-success rule instead equilibrates
at the largest step that fails half the time, wasting most of the budget at
marginal step sizes).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from wormforage.connectome import Genome

MESH_POLARITIES = ("refine_on_success", "refine_on_failure")


@dataclass(frozen=True)
class MadsConfig:
    max_evaluations: int | None = None  # None: 50 * |subset| per call
    initial_mesh_size: float = 1.0
    mesh_refine_factor: float = 0.5
    mesh_coarsen_factor: float = 2.0
    min_mesh_size: float = 1e-3
    max_subset: int = 50
    mesh_polarity: str = "refine_on_success"
    lower_bound: float | None = None  # box bounds applied to every subset coordinate
    upper_bound: float | None = None

    def __post_init__(self) -> None:
        if not 0 < self.mesh_refine_factor < 1:
            raise ValueError("mesh_refine_factor must be in (0, 1)")
        if not self.mesh_coarsen_factor > 1:
            raise ValueError("mesh_coarsen_factor must be > 1")
        # Reciprocal factors keep every mesh size on one common lattice.
        if abs(self.mesh_refine_factor * self.mesh_coarsen_factor - 1.0) > 1e-12:
            raise ValueError("mesh_coarsen_factor must equal 1 / mesh_refine_factor")
        if not 0 < self.min_mesh_size <= self.initial_mesh_size:
            raise ValueError("need 0 < min_mesh_size <= initial_mesh_size")
        if self.mesh_polarity not in MESH_POLARITIES:
            raise ValueError(f"mesh_polarity must be one of {MESH_POLARITIES}")
        if self.max_subset < 1:
            raise ValueError("max_subset must be >= 1")
        if (
            self.lower_bound is not None
            and self.upper_bound is not None
            and not self.lower_bound < self.upper_bound
        ):
            raise ValueError("lower_bound must be < upper_bound")

    def budget_for(self, dimension: int) -> int:
        return 50 * dimension if self.max_evaluations is None else self.max_evaluations


@dataclass(frozen=True)
class MeshState:
    incumbent: np.ndarray  # current best subset values
    incumbent_score: float  # best objective seen (monotone non-decreasing)
    mesh_size: float
    evaluations_used: int


@dataclass(frozen=True)
class MadsResult:
    genome: Genome
    score: float | None  # objective of the returned genome (None iff 0 evaluations)
    evaluations: int


_BASIS_REFLECTIONS = 5


def _integer_householder(dimension: int, rng: np.random.Generator) -> np.ndarray:
    """Scaled Householder reflection (q.q) I - 2 q q^T from a primitive integer q."""
    while True:
        q = rng.integers(-5, 6, size=dimension)
        if np.any(q):
            break
    g = 0
    for c in q:
        g = math.gcd(g, abs(int(c)))
    q = q // g
    qq = int(q @ q)
    return qq * np.eye(dimension, dtype=np.int64) - 2 * np.outer(q, q)


def _integer_orthogonal_basis(dimension: int, rng: np.random.Generator) -> np.ndarray:
    """Columns: mutually orthogonal integer vectors of equal squared norm.

    Product of several scaled Householder reflections, each built from an
    independent random primitive integer vector q as (q.q) I - 2 q q^T. The
    product keeps integer entries, orthogonal columns, and equal column norms
    (the product of the q.q factors), so scaling by mesh_size / norm puts poll
    points at Euclidean distance exactly mesh_size while staying on the integer
    lattice. A single reflection is nearly useless against error directions
    orthogonal to its q (its columns spread such directions evenly, pinning the
    best alignment at the 1/sqrt(dimension) floor); composing reflections mixes
    the columns toward isotropy. Entries stay far below int64 overflow: each
    factor's q.q is at most 25 * dimension <= 1250 for dimension <= 50.
    """
    h = _integer_householder(dimension, rng)
    for _ in range(_BASIS_REFLECTIONS - 1):
        h = h @ _integer_householder(dimension, rng)
    return h


def poll_points(state: MeshState, dimension: int, seed) -> list[np.ndarray]:
    """2*dimension trial points on the mesh lattice around the incumbent.

    The positive and negative copies of an orthogonal basis form a positive
    spanning set; every point differs from the incumbent by integer multiples
    of the mesh unit and lies at distance exactly `state.mesh_size`.
    """
    if not state.mesh_size > 0:
        raise ValueError("mesh_size must be > 0")
    rng = np.random.default_rng(seed)
    basis = _integer_orthogonal_basis(dimension, rng)
    # All columns share one norm (product of the reflection q.q factors). The
    # entries fit int64/float64 exactly, but the squared norm can exceed int64,
    # so the dot product must be taken in float.
    col = basis[:, 0].astype(np.float64)
    norm = float(col @ col) ** 0.5
    unit = state.mesh_size / norm
    points = [state.incumbent + unit * basis[:, j] for j in range(dimension)]
    points += [state.incumbent - unit * basis[:, j] for j in range(dimension)]
    return points


def update_mesh(state: MeshState, improved: bool, cfg: MadsConfig) -> MeshState:
    """Rescale the mesh according to the configured polarity.

    `refine_on_success`: refine on improvement, coarsen on failure.
    `refine_on_failure`: hold on improvement, refine on failure (monotone
    non-increasing mesh).
    """
    if cfg.mesh_polarity == "refine_on_success":
        factor = cfg.mesh_refine_factor if improved else cfg.mesh_coarsen_factor
    else:
        factor = 1.0 if improved else cfg.mesh_refine_factor
    return replace(state, mesh_size=state.mesh_size * factor)


def _check_subset(genome: Genome, subset: Sequence[int], cfg: MadsConfig) -> list[int]:
    subset = [int(s) for s in subset]
    if len(subset) > cfg.max_subset:
        raise ValueError(f"subset too large: {len(subset)} > max_subset {cfg.max_subset}")
    if len(set(subset)) != len(subset):
        raise ValueError("subset indices must be distinct")
    for s in subset:
        if not 0 <= s < len(genome):
            raise ValueError(f"subset index out of range: {s}")
    return subset


def run_mads(
    genome: Genome,
    subset: Sequence[int],
    objective: Callable[[Genome], float],
    cfg: MadsConfig,
    seed: int,
    initial_score: float | None = None,
    trace_path: str | Path | None = None,
) -> MadsResult:
    """Maximize over the subset coordinates; all other coordinates untouched.

    `initial_score`, when given, must equal objective(genome) — it seeds the
    incumbent without spending an evaluation. Stops on budget exhaustion or
    when the mesh falls below `min_mesh_size`.
    """
    subset = _check_subset(genome, subset, cfg)
    dimension = len(subset)
    budget = cfg.budget_for(dimension)
    if budget <= 0 or dimension == 0:
        return MadsResult(genome, initial_score, 0)

    evals = 0
    tracing = trace_path is not None
    trace: list[list] = []  # [eval_index, delta, score, improved]
    if initial_score is None:
        initial_score = objective(genome)
        if tracing:
            trace.append([evals, cfg.initial_mesh_size, initial_score, 0])
        evals += 1

    incumbent = genome.weights[subset].copy()
    score = float(initial_score)
    delta = cfg.initial_mesh_size
    iteration = 0
    while evals < budget and delta >= cfg.min_mesh_size:
        state = MeshState(incumbent, score, delta, evals)
        points = poll_points(state, dimension, [seed, iteration])
        best_j = -1
        best_score = -math.inf
        n_evaluated = 0
        accepted_row: dict[int, int] = {}
        for j, pt in enumerate(points):
            if cfg.lower_bound is not None and np.any(pt < cfg.lower_bound):
                continue
            if cfg.upper_bound is not None and np.any(pt > cfg.upper_bound):
                continue
            if evals >= budget:
                break  # budget-limited partial poll, truncated in index order
            cand_score = objective(genome.with_values(subset, pt))
            if tracing:
                accepted_row[j] = len(trace)
                trace.append([evals, delta, cand_score, 0])
            evals += 1
            n_evaluated += 1
            if cand_score > best_score:
                best_score = cand_score
                best_j = j
        improved = best_j >= 0 and best_score > score
        if improved:
            incumbent = points[best_j]
            score = best_score
            if tracing:
                trace[accepted_row[best_j]][3] = 1
        new_state = update_mesh(state, improved, cfg)
        if n_evaluated == 0 and new_state.mesh_size >= delta:
            break  # every point infeasible and the mesh will not shrink
        delta = new_state.mesh_size
        iteration += 1

    if trace_path is not None:
        with open(trace_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("eval_index,delta,score,improved\n")
            for idx, dlt, sc, imp in trace:
                fh.write(f"{idx},{float(dlt)!r},{float(sc)!r},{imp}\n")
    return MadsResult(genome.with_values(subset, incumbent), score, evals)


def optimize_subset(
    genome: Genome,
    subset: Sequence[int],
    objective: Callable[[Genome], float],
    cfg: MadsConfig,
    seed: int,
    initial_score: float | None = None,
) -> Genome:
    """`run_mads` returning only the genome (objective never worse than input)."""
    return run_mads(genome, subset, objective, cfg, seed, initial_score).genome

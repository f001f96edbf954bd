"""Mesh search: poll geometry, mesh polarity, budget discipline, convergence."""

import math

import numpy as np
import pytest

from wormforage.connectome import Genome
from wormforage.mads import (
    MadsConfig,
    MeshState,
    optimize_subset,
    poll_points,
    run_mads,
    update_mesh,
)


def flat_genome(values):
    w = np.asarray(values, dtype=np.float64)
    return Genome.from_weights(w, np.zeros_like(w))


def quadratic(target=3.0):
    return lambda g: -float(np.sum((g.weights - target) ** 2))


class CountingObjective:
    def __init__(self, fn):
        self.fn = fn
        self.calls = 0

    def __call__(self, genome):
        self.calls += 1
        return self.fn(genome)


class TestMadsConfig:
    def test_refine_factor_range(self):
        """The refine factor must shrink: strictly inside (0, 1)."""
        with pytest.raises(ValueError, match="mesh_refine_factor"):
            MadsConfig(mesh_refine_factor=1.0, mesh_coarsen_factor=1.0)
        with pytest.raises(ValueError, match="mesh_refine_factor"):
            MadsConfig(mesh_refine_factor=0.0)

    def test_reciprocal_factors_enforced(self):
        """coarsen must equal 1/refine so all mesh sizes share one lattice."""
        with pytest.raises(ValueError, match="1 / mesh_refine_factor"):
            MadsConfig(mesh_refine_factor=0.5, mesh_coarsen_factor=3.0)
        MadsConfig(mesh_refine_factor=0.25, mesh_coarsen_factor=4.0)

    def test_min_mesh_within_initial(self):
        """0 < min_mesh_size <= initial_mesh_size."""
        with pytest.raises(ValueError, match="min_mesh_size"):
            MadsConfig(min_mesh_size=2.0, initial_mesh_size=1.0)
        with pytest.raises(ValueError, match="min_mesh_size"):
            MadsConfig(min_mesh_size=0.0)

    def test_polarity_names(self):
        """Only the two documented polarities exist."""
        with pytest.raises(ValueError, match="mesh_polarity"):
            MadsConfig(mesh_polarity="inverted")

    def test_bounds_ordering(self):
        """lower_bound must sit below upper_bound when both are given."""
        with pytest.raises(ValueError, match="lower_bound"):
            MadsConfig(lower_bound=5.0, upper_bound=5.0)

    def test_default_budget_scales_with_subset(self):
        """Without an explicit budget, 50 evaluations per coordinate."""
        assert MadsConfig().budget_for(49) == 2450
        assert MadsConfig(max_evaluations=7).budget_for(49) == 7


class TestPollPoints:
    def test_one_dimensional_poll_is_plus_minus_delta(self):
        """Dimension 1 polls exactly the two points incumbent +/- delta."""
        state = MeshState(np.array([5.0]), 0.0, 0.75, 0)
        pts = poll_points(state, 1, seed=3)
        vals = sorted(p[0] for p in pts)
        assert vals == pytest.approx([5.0 - 0.75, 5.0 + 0.75], abs=1e-12)

    def test_point_count_and_exact_distance(self):
        """2*dimension points, every one at Euclidean distance exactly delta."""
        rng = np.random.default_rng(5)
        for dim in (2, 3, 7, 25, 49):
            inc = rng.uniform(-5, 5, dim)
            delta = float(rng.uniform(0.1, 4.0))
            state = MeshState(inc, 0.0, delta, 0)
            pts = poll_points(state, dim, seed=int(rng.integers(1 << 30)))
            assert len(pts) == 2 * dim
            for p in pts:
                assert np.linalg.norm(p - inc) == pytest.approx(delta, rel=1e-9)

    def test_directions_positively_span(self):
        """Every direction has positive inner product with some poll step:
        no half-space escapes the poll set."""
        rng = np.random.default_rng(6)
        for dim in (2, 5, 25):
            state = MeshState(np.zeros(dim), 0.0, 1.0, 0)
            pts = poll_points(state, dim, seed=int(rng.integers(1 << 30)))
            dirs = np.array(pts)
            for _ in range(200):
                u = rng.standard_normal(dim)
                u /= np.linalg.norm(u)
                assert (dirs @ u).max() > 1e-9

    def test_points_on_mesh_lattice(self):
        """Poll steps are integer multiples of one mesh unit: the direction
        matrix has integer entries, mutually orthogonal columns of one shared
        norm, and poll_points scales it by delta/norm."""
        from wormforage.mads import _integer_orthogonal_basis

        rng = np.random.default_rng(7)
        for dim in (1, 2, 5, 25, 49):
            basis = _integer_orthogonal_basis(dim, np.random.default_rng(dim))
            assert basis.dtype.kind == "i"
            cols = basis.astype(np.float64)
            gram = cols.T @ cols
            norms = np.diag(gram)
            assert np.allclose(norms, norms[0], rtol=1e-12)
            off_diag = gram - np.diag(norms)
            assert np.max(np.abs(off_diag)) <= 1e-6 * norms[0]
            # poll_points uses the same construction scaled to distance delta,
            # so each offset is (delta/norm) * an integer vector: a lattice step.
            inc = rng.uniform(-5, 5, dim)
            delta = float(rng.uniform(0.1, 4.0))
            pts = poll_points(MeshState(inc, 0.0, delta, 0), dim, seed=int(rng.integers(1 << 30)))
            for p in pts:
                assert np.linalg.norm(p - inc) == pytest.approx(delta, rel=1e-9)

    def test_deterministic_in_seed(self):
        """The same seed reproduces the same poll set."""
        state = MeshState(np.zeros(5), 0.0, 1.0, 0)
        a = poll_points(state, 5, seed=11)
        b = poll_points(state, 5, seed=11)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_zero_mesh_rejected(self):
        """A non-positive mesh size is an error."""
        state = MeshState(np.zeros(2), 0.0, 0.0, 0)
        with pytest.raises(ValueError, match="mesh_size"):
            poll_points(state, 2, seed=1)


class TestUpdateMesh:
    def test_refine_on_success_shrinks_on_improvement(self):
        """Refine-on-success: improvement shrinks delta by the refine factor."""
        cfg = MadsConfig(mesh_polarity="refine_on_success")
        state = MeshState(np.zeros(1), 0.0, 1.0, 0)
        assert update_mesh(state, True, cfg).mesh_size == 0.5
        assert update_mesh(state, False, cfg).mesh_size == 2.0

    def test_alternation_returns_to_start(self):
        """Improve then fail restores the original mesh size exactly."""
        cfg = MadsConfig(mesh_polarity="refine_on_success")
        state = MeshState(np.zeros(1), 0.0, 1.25, 0)
        once = update_mesh(state, True, cfg)
        back = update_mesh(once, False, cfg)
        assert back.mesh_size == 1.25

    def test_refine_on_failure_holds_on_improvement(self):
        """Refine-on-failure: improvement holds delta, failure refines it."""
        cfg = MadsConfig(mesh_polarity="refine_on_failure")
        state = MeshState(np.zeros(1), 0.0, 1.0, 0)
        assert update_mesh(state, True, cfg).mesh_size == 1.0
        assert update_mesh(state, False, cfg).mesh_size == 0.5


class TestRunMads:
    def test_budget_zero_returns_input(self):
        """With no budget the input genome comes back untouched."""
        g = flat_genome([1.0, 2.0])
        cfg = MadsConfig(max_evaluations=0)
        res = run_mads(g, [0, 1], quadratic(), cfg, seed=0)
        assert res.genome is g
        assert res.evaluations == 0
        assert res.score is None

    def test_scope_confinement(self):
        """Coordinates outside the subset are bit-identical before and after."""
        g = flat_genome([1.0, -4.0, 2.5, 9.0, 0.25])
        cfg = MadsConfig(max_evaluations=200, mesh_polarity="refine_on_failure")
        res = run_mads(g, [1, 3], quadratic(), cfg, seed=2)
        for i in (0, 2, 4):
            assert res.genome.weights[i] == g.weights[i]

    def test_objective_never_degrades(self):
        """The returned genome scores at least as well as the input."""
        obj = quadratic()
        rng = np.random.default_rng(8)
        for seed in range(20):
            g = flat_genome(rng.uniform(-10, 10, 6))
            cfg = MadsConfig(max_evaluations=int(rng.integers(1, 120)))
            res = run_mads(g, list(range(6)), obj, cfg, seed=seed)
            assert obj(res.genome) >= obj(g)
            assert res.score == obj(res.genome)

    def test_budget_respected_exactly(self):
        """The objective is called at most the configured number of times."""
        for budget in (1, 2, 9, 10, 37):
            counter = CountingObjective(quadratic())
            g = flat_genome(np.zeros(5))
            cfg = MadsConfig(max_evaluations=budget, mesh_polarity="refine_on_failure")
            res = run_mads(g, list(range(5)), counter, cfg, seed=4)
            assert counter.calls == res.evaluations <= budget

    def test_initial_score_saves_one_evaluation(self):
        """Passing the known incumbent score spends the whole budget on polls
        and returns the same result as computing it."""
        g = flat_genome(np.zeros(4))
        obj = quadratic()
        cfg = MadsConfig(max_evaluations=41, mesh_polarity="refine_on_failure")
        plain = run_mads(g, list(range(4)), obj, cfg, seed=6)
        counter = CountingObjective(obj)
        seeded = run_mads(g, list(range(4)), counter, cfg, seed=6,
                          initial_score=obj(g))
        assert counter.calls == seeded.evaluations == 41
        assert plain.evaluations == 41  # initial evaluation included
        # The seeded run spends its whole budget polling, so it can only do
        # at least as well as the run that paid for the initial evaluation.
        assert seeded.score >= plain.score

    def test_memoized_objective_reproduces_result(self):
        """Output depends only on observed objective values: replaying through
        a memo gives the identical genome, score, and evaluation count."""
        g = flat_genome(np.zeros(6))
        cfg = MadsConfig(max_evaluations=150, mesh_polarity="refine_on_failure")
        memo = {}
        base = quadratic()

        def memod(genome):
            key = genome.weights.tobytes()
            if key not in memo:
                memo[key] = base(genome)
            return memo[key]

        first = run_mads(g, list(range(6)), memod, cfg, seed=9)
        second = run_mads(g, list(range(6)), memod, cfg, seed=9)
        assert np.array_equal(first.genome.weights, second.genome.weights)
        assert first.score == second.score
        assert first.evaluations == second.evaluations

    def test_subset_validation(self):
        """Oversized, duplicate, and out-of-range subsets are rejected."""
        g = flat_genome(np.zeros(60))
        cfg = MadsConfig(max_subset=50)
        with pytest.raises(ValueError, match="subset too large"):
            run_mads(g, list(range(51)), quadratic(), cfg, seed=0)
        with pytest.raises(ValueError, match="distinct"):
            run_mads(g, [1, 1], quadratic(), cfg, seed=0)
        with pytest.raises(ValueError, match="out of range"):
            run_mads(g, [60], quadratic(), cfg, seed=0)

    def test_five_coordinate_quadratic_within_500_evaluations(self):
        """The documented example: budget 500 on a 5-coordinate quadratic ends
        within 0.05 of the optimum on every coordinate."""
        g = flat_genome(np.zeros(5))
        cfg = MadsConfig(max_evaluations=500, initial_mesh_size=4.0,
                         mesh_polarity="refine_on_failure")
        res = run_mads(g, list(range(5)), quadratic(), cfg, seed=12)
        assert np.max(np.abs(res.genome.weights - 3.0)) < 0.05

    def test_mid_sized_quadratic_converges(self):
        """25 coordinates, 200 evaluations per coordinate: inside 0.1 each."""
        g = flat_genome(np.zeros(25))
        cfg = MadsConfig(max_evaluations=5000, initial_mesh_size=4.0,
                         mesh_polarity="refine_on_failure")
        res = run_mads(g, list(range(25)), quadratic(), cfg, seed=13)
        assert np.max(np.abs(res.genome.weights - 3.0)) < 0.1

    def test_refine_on_success_stops_on_mesh_collapse(self):
        """Under refine-on-success a run of improvements shrinks the mesh to
        the stopping tolerance well before a generous budget is spent."""
        g = flat_genome(np.zeros(3))
        cfg = MadsConfig(max_evaluations=100000, initial_mesh_size=1.0,
                         min_mesh_size=0.25, mesh_polarity="refine_on_success")
        res = run_mads(g, [0, 1, 2], quadratic(), cfg, seed=14)
        assert res.evaluations < 100000

    def test_bounds_exclude_points_without_spending_budget(self):
        """Poll points outside the box are skipped unevaluated, and the
        returned genome respects the bounds."""
        g = flat_genome([0.0, 0.0])
        counter = CountingObjective(quadratic())
        cfg = MadsConfig(max_evaluations=60, lower_bound=-1.0, upper_bound=1.0,
                         initial_mesh_size=1.0, mesh_polarity="refine_on_failure")
        res = run_mads(g, [0, 1], counter, cfg, seed=15)
        assert counter.calls == res.evaluations <= 60
        assert (res.genome.weights >= -1.0).all()
        assert (res.genome.weights <= 1.0).all()

    def test_trace_csv_shape(self, tmp_path):
        """The debug trace lists one row per evaluation with the header
        eval_index,delta,score,improved."""
        g = flat_genome(np.zeros(2))
        cfg = MadsConfig(max_evaluations=30, mesh_polarity="refine_on_failure")
        path = tmp_path / "trace.csv"
        res = run_mads(g, [0, 1], quadratic(), cfg, seed=16, trace_path=path)
        lines = path.read_text().splitlines()
        assert lines[0] == "eval_index,delta,score,improved"
        assert len(lines) - 1 == res.evaluations
        improved = [line.split(",")[3] for line in lines[1:]]
        assert set(improved) <= {"0", "1"}

    def test_optimize_subset_returns_genome(self):
        """The convenience wrapper returns just the improved genome."""
        g = flat_genome(np.zeros(3))
        cfg = MadsConfig(max_evaluations=300, initial_mesh_size=4.0,
                         mesh_polarity="refine_on_failure")
        out = optimize_subset(g, [0, 1, 2], quadratic(), cfg, seed=17)
        assert isinstance(out, Genome)
        assert quadratic()(out) >= quadratic()(g)

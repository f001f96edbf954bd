"""Integrate-and-fire step semantics against hand computations and a brute-force oracle."""

import numpy as np
import pytest

from wormforage.connectome import Genome, SynapseKind, build_connectome
from wormforage.neural_sim import (
    NetworkState,
    SimParams,
    force_fire,
    muscle_activity,
    reset_state,
    step_network,
)

CHEM = SynapseKind.CHEMICAL
GAP = SynapseKind.GAP_JUNCTION
NMJ = SynapseKind.NEUROMUSCULAR


def roles(muscle_left=(), muscle_right=(), food=(), avoid=()):
    return {
        "sensory_food": list(food),
        "sensory_avoid": list(avoid),
        "muscle_left": list(muscle_left),
        "muscle_right": list(muscle_right),
    }


def mini(rows, **role_kw):
    conn = build_connectome(rows, roles(**role_kw))
    return conn, Genome.from_prior(conn)


def random_network(rng):
    """A random valid network with at most 10 nodes and mixed synapse kinds."""
    n_neurons = int(rng.integers(2, 9))
    neuron_names = [f"N{i}" for i in range(n_neurons)]
    muscle_names = ["ML", "MR"]
    rows = []
    seen = set()
    for _ in range(int(rng.integers(1, 26))):
        kind = (CHEM, NMJ, GAP)[int(rng.integers(0, 3))]
        pre = neuron_names[int(rng.integers(0, n_neurons))]
        if kind is NMJ:
            post = muscle_names[int(rng.integers(0, 2))]
        else:
            post = neuron_names[int(rng.integers(0, n_neurons))]
            if post == pre:
                continue
        if kind is GAP:
            if (pre, post, kind) in seen or (post, pre, kind) in seen:
                continue
            seen.add((pre, post, kind))
            seen.add((post, pre, kind))
            rows.append((pre, post, float(rng.uniform(-10, 10)), kind))
            rows.append((post, pre, float(rng.uniform(-10, 10)), kind))
            continue
        if (pre, post, kind) in seen:
            continue
        seen.add((pre, post, kind))
        rows.append((pre, post, float(rng.uniform(-10, 10)), kind))
    if not rows:
        rows = [(neuron_names[0], "ML", 1.0, NMJ)]
    present = {r[1] for r in rows}
    return mini(
        rows,
        muscle_left=["ML"] if "ML" in present else [],
        muscle_right=["MR"] if "MR" in present else [],
    )


class TestSimParams:
    def test_threshold_must_be_positive(self):
        """A zero or negative firing threshold is rejected."""
        with pytest.raises(ValueError, match="fire_threshold"):
            SimParams(fire_threshold=0.0)
        with pytest.raises(ValueError, match="fire_threshold"):
            SimParams(fire_threshold=-3.0)

    def test_reset_value_pinned_to_zero(self):
        """The reset potential is fixed at 0 by the model."""
        with pytest.raises(ValueError, match="reset_value"):
            SimParams(reset_value=1.0)


class TestStepNetwork:
    def test_zero_input_fixed_point(self):
        """With nothing fired and nothing forced, potentials are unchanged and
        no node fires."""
        conn, genome = mini([("A", "K", 3.0, CHEM)])
        state = reset_state(conn)
        state.v[:] = [5.0, 17.5]
        out = step_network(state, genome, conn, SimParams())
        assert np.array_equal(out.v, [5.0, 17.5])
        assert not out.fired.any()

    def test_two_presynaptic_sum(self):
        """Two fired presynaptic neurons with weights 3 and -1 leave the target
        at potential 2, below threshold."""
        conn, genome = mini([("A", "K", 3.0, CHEM), ("B", "K", -1.0, CHEM)])
        state = reset_state(conn)
        state.fired[conn.resolve("A").index] = True
        state.fired[conn.resolve("B").index] = True
        out = step_network(state, genome, conn, SimParams(fire_threshold=30.0))
        k = conn.resolve("K").index
        assert out.v[k] == 2.0
        assert not out.fired[k]

    def test_threshold_crossing_resets(self):
        """Potential 29 plus an incoming weight 2 crosses threshold 30: the
        node fires and resets to 0."""
        conn, genome = mini([("A", "K", 2.0, CHEM)])
        state = reset_state(conn)
        k = conn.resolve("K").index
        state.v[k] = 29.0
        state.fired[conn.resolve("A").index] = True
        out = step_network(state, genome, conn, SimParams(fire_threshold=30.0))
        assert out.fired[k]
        assert out.v[k] == 0.0

    def test_exact_threshold_fires(self):
        """Reaching the threshold exactly counts as firing."""
        conn, genome = mini([("A", "K", 2.0, CHEM)])
        state = reset_state(conn)
        k = conn.resolve("K").index
        state.v[k] = 28.0
        state.fired[conn.resolve("A").index] = True
        out = step_network(state, genome, conn, SimParams(fire_threshold=30.0))
        assert out.fired[k]
        assert out.v[k] == 0.0

    def test_muscles_integrate_but_never_fire(self):
        """A muscle accumulates potential far beyond threshold without firing
        or resetting."""
        conn, genome = mini([("A", "ML", 50.0, NMJ)], muscle_left=["ML"])
        state = reset_state(conn)
        state.fired[conn.resolve("A").index] = True
        out = step_network(state, genome, conn, SimParams(fire_threshold=30.0))
        m = conn.resolve("ML").index
        assert out.v[m] == 50.0
        assert not out.fired[m]
        out.fired[conn.resolve("A").index] = True
        out2 = step_network(out, genome, conn, SimParams(fire_threshold=30.0))
        assert out2.v[m] == 100.0

    def test_forced_node_fires_and_resets(self):
        """A forced node fires regardless of potential, resets to 0, and the
        forced set is consumed by the step."""
        conn, genome = mini([("A", "K", 1.0, CHEM)])
        state = force_fire(reset_state(conn), ["A"], conn)
        a = conn.resolve("A").index
        state.v[a] = 7.0
        out = step_network(state, genome, conn, SimParams())
        assert out.fired[a]
        assert out.v[a] == 0.0
        assert not out.forced.any()
        # The consumed forcing no longer applies on the following step.
        out2 = step_network(out, genome, conn, SimParams())
        k = conn.resolve("K").index
        assert out2.v[k] == 1.0  # propagation from the forced firing
        assert not out2.fired.any()

    def test_gap_junction_directions_are_independent_weights(self):
        """Each direction of a gap-junction pair carries its own coordinate."""
        rows = [("A", "B", 1.0, GAP), ("B", "A", 2.0, GAP)]
        conn, genome = mini(rows)
        state = reset_state(conn)
        state.fired[conn.resolve("A").index] = True
        out = step_network(state, genome, conn, SimParams())
        assert out.v[conn.resolve("B").index] == 1.0
        state2 = reset_state(conn)
        state2.fired[conn.resolve("B").index] = True
        out2 = step_network(state2, genome, conn, SimParams())
        assert out2.v[conn.resolve("A").index] == 2.0

    def test_dimension_mismatch_rejected(self):
        """State sized for a different connectome is an error, as is a genome
        of the wrong length."""
        conn, genome = mini([("A", "K", 3.0, CHEM)])
        other, _ = mini([("A", "K", 1.0, CHEM), ("A", "J", 1.0, CHEM)])
        with pytest.raises(ValueError, match="nodes"):
            step_network(reset_state(other), genome, conn, SimParams())
        bad = Genome.from_weights(np.zeros(5), np.zeros(5))
        with pytest.raises(ValueError, match="genome length"):
            step_network(reset_state(conn), bad, conn, SimParams())

    def test_matches_brute_force_oracle_on_random_networks(self):
        """1000 random networks of at most 10 nodes: the step matches a
        row-by-row brute-force update exactly, including firing and resets."""
        rng = np.random.default_rng(20240831)
        params = SimParams(fire_threshold=30.0)
        for _ in range(1000):
            conn, genome = random_network(rng)
            genome = genome.with_values(
                range(conn.n_synapses), rng.uniform(-12, 12, conn.n_synapses)
            )
            v = rng.uniform(-40.0, 40.0, conn.n_nodes)
            fired = rng.random(conn.n_nodes) < 0.4
            forced = (rng.random(conn.n_nodes) < 0.3) & ~conn.is_muscle
            state = NetworkState(v.copy(), fired.copy(), forced.copy())

            expect_v = v.copy()
            for s in range(conn.n_synapses):
                if fired[conn.pre_indices[s]]:
                    expect_v[conn.post_indices[s]] += genome.weights[s]
            crossed = (expect_v >= params.fire_threshold) & ~conn.is_muscle
            expect_fired = crossed | forced
            expect_v[expect_fired] = 0.0

            out = step_network(state, genome, conn, params)
            assert np.array_equal(out.v, expect_v)
            assert np.array_equal(out.fired, expect_fired)
            assert not out.forced.any()


class TestForceFire:
    def test_unknown_id_rejected(self):
        """Forcing a name absent from the connectome is an error."""
        conn, _ = mini([("A", "K", 3.0, CHEM)])
        with pytest.raises(ValueError, match="unknown neuron name"):
            force_fire(reset_state(conn), ["NOPE"], conn)

    def test_muscles_cannot_be_forced(self):
        """Muscles never fire, so forcing one is an error."""
        conn, _ = mini([("A", "ML", 1.0, NMJ)], muscle_left=["ML"])
        with pytest.raises(ValueError, match="muscle"):
            force_fire(reset_state(conn), ["ML"], conn)

    def test_forcing_accumulates_until_consumed(self):
        """Successive calls union their targets; ids may be names or NeuronIds."""
        conn, _ = mini([("A", "K", 3.0, CHEM), ("B", "K", 1.0, CHEM)])
        state = force_fire(reset_state(conn), ["A"], conn)
        state = force_fire(state, [conn.resolve("B")], conn)
        assert state.forced[conn.resolve("A").index]
        assert state.forced[conn.resolve("B").index]
        assert state.forced.sum() == 2

    def test_original_state_not_mutated(self):
        """force_fire returns a new state; the input's forced set is untouched."""
        conn, _ = mini([("A", "K", 3.0, CHEM)])
        state = reset_state(conn)
        force_fire(state, ["A"], conn)
        assert not state.forced.any()


class TestMuscleActivity:
    def test_sums_per_side_and_zeroes(self):
        """Left and right sums come back separately and muscle potentials are
        zeroed in place; neuron potentials are untouched."""
        rows = [
            ("A", "ML1", 1.0, NMJ),
            ("A", "ML2", 1.0, NMJ),
            ("A", "MR1", 1.0, NMJ),
        ]
        conn, _ = mini(rows, muscle_left=["ML1", "ML2"], muscle_right=["MR1"])
        state = reset_state(conn)
        state.v[conn.resolve("ML1").index] = 4.0
        state.v[conn.resolve("ML2").index] = -1.5
        state.v[conn.resolve("MR1").index] = 7.0
        state.v[conn.resolve("A").index] = 9.0
        a_left, a_right = muscle_activity(state, conn)
        assert a_left == 2.5
        assert a_right == 7.0
        assert state.v[conn.resolve("ML1").index] == 0.0
        assert state.v[conn.resolve("MR1").index] == 0.0
        assert state.v[conn.resolve("A").index] == 9.0

    def test_second_read_is_zero(self):
        """Read-and-reset: reading again without new input returns zeros."""
        conn, _ = mini([("A", "ML", 1.0, NMJ)], muscle_left=["ML"])
        state = reset_state(conn)
        state.v[conn.resolve("ML").index] = 3.0
        assert muscle_activity(state, conn) == (3.0, 0.0)
        assert muscle_activity(state, conn) == (0.0, 0.0)

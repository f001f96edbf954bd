"""Discrete-time, no-leak integrate-and-fire dynamics over a connectome.

All nodes update synchronously from the previous step's firing vector. Muscle
nodes integrate but never threshold-fire; their potentials are read and zeroed
once per environment step by `muscle_activity`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from wormforage.connectome import Connectome, Genome, NeuronId


@dataclass(frozen=True)
class SimParams:
    """Firing threshold is not biologically pinned; it must appear in configs."""

    fire_threshold: float = 30.0
    reset_value: float = 0.0

    def __post_init__(self) -> None:
        if not self.fire_threshold > 0:
            raise ValueError(f"fire_threshold must be > 0, got {self.fire_threshold}")
        if self.reset_value != 0.0:
            raise ValueError("reset_value is fixed at 0")


@dataclass
class NetworkState:
    """Value type owned by one episode evaluator; never shared across episodes."""

    v: np.ndarray
    fired: np.ndarray
    forced: np.ndarray

    def copy(self) -> "NetworkState":
        return NetworkState(self.v.copy(), self.fired.copy(), self.forced.copy())


def reset_state(conn: Connectome) -> NetworkState:
    """All potentials zero, nothing fired, nothing forced."""
    n = conn.n_nodes
    return NetworkState(
        v=np.zeros(n, dtype=np.float64),
        fired=np.zeros(n, dtype=bool),
        forced=np.zeros(n, dtype=bool),
    )


def _check_dims(state: NetworkState, conn: Connectome) -> None:
    if state.v.shape != (conn.n_nodes,):
        raise ValueError(f"state holds {state.v.shape[0]} nodes, connectome {conn.n_nodes}")


def force_fire(state: NetworkState, ids: Iterable[NeuronId | str], conn: Connectome) -> NetworkState:
    """Mark nodes to fire (x=1) on the next step regardless of potential.

    Forcing accumulates by set union until the next `step_network` consumes it.
    Muscles cannot be forced: they never fire.
    """
    _check_dims(state, conn)
    forced = state.forced.copy()
    for nid in ids:
        node = conn.resolve(nid) if isinstance(nid, str) else nid
        if node.index >= conn.n_nodes or conn.neurons[node.index] != node:
            raise ValueError(f"unknown neuron id: {node!r}")
        if conn.is_muscle[node.index]:
            raise ValueError(f"cannot force-fire muscle node {node.name!r}")
        forced[node.index] = True
    return NetworkState(state.v.copy(), state.fired.copy(), forced)


def step_network(
    state: NetworkState, genome: Genome, conn: Connectome, params: SimParams
) -> NetworkState:
    """Advance one synchronous step.

    v'[k] = v[k] + sum of w_ik over presynaptic i that fired last step; every
    non-muscle node at or above threshold fires and resets to 0; forced nodes
    fire (and reset) regardless of potential; the forced set is consumed.
    """
    _check_dims(state, conn)
    if len(genome) != conn.n_synapses:
        raise ValueError(f"genome length {len(genome)} != synapse count {conn.n_synapses}")
    v = state.v.copy()
    live = state.fired[conn.pre_indices]
    # np.add.at accumulates in row order, matching the episode kernel bit-for-bit.
    np.add.at(v, conn.post_indices[live], genome.weights[live])
    crossed = (v >= params.fire_threshold) & ~conn.is_muscle
    fired = crossed | state.forced
    v[fired] = 0.0
    return NetworkState(v, fired, np.zeros_like(state.forced))


def muscle_activity(state: NetworkState, conn: Connectome) -> tuple[float, float]:
    """Sum muscle potentials per side, then zero them (read-and-reset, in place)."""
    _check_dims(state, conn)
    a_left = 0.0
    for i in conn.muscle_left_indices:
        a_left += state.v[i]
    a_right = 0.0
    for i in conn.muscle_right_indices:
        a_right += state.v[i]
    state.v[conn.muscle_left_indices] = 0.0
    state.v[conn.muscle_right_indices] = 0.0
    return a_left, a_right

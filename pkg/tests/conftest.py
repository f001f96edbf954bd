"""Shared fixtures: deterministic connectomes reused across test modules."""

import pytest

from wormforage.connectome import (
    AVOIDANCE_NAMES,
    FOOD_SENSORY_NAMES,
    SynapseKind,
    build_connectome,
    synthetic_connectome,
)


@pytest.fixture(scope="session")
def small_conn():
    """The packaged small-fixture topology: 60 nodes, 400 synapses."""
    return synthetic_connectome(seed=7, n_neurons=60, n_synapses=400)


def tiny_rows():
    """A minimal hand-written network: every sensor feeds one interneuron,
    which drives one muscle per side; one gap-junction pair for coverage."""
    rows = []
    for name in FOOD_SENSORY_NAMES + AVOIDANCE_NAMES:
        rows.append((name, "INT0", 5.0, SynapseKind.CHEMICAL))
    rows.append(("INT0", "MDL01", 4.0, SynapseKind.NEUROMUSCULAR))
    rows.append(("INT0", "MDR01", 3.0, SynapseKind.NEUROMUSCULAR))
    rows.append(("INT0", "ADFL", 1.0, SynapseKind.GAP_JUNCTION))
    rows.append(("ADFL", "INT0", 2.0, SynapseKind.GAP_JUNCTION))
    return rows


def tiny_roles():
    return {
        "sensory_food": list(FOOD_SENSORY_NAMES),
        "sensory_avoid": list(AVOIDANCE_NAMES),
        "muscle_left": ["MDL01"],
        "muscle_right": ["MDR01"],
    }


@pytest.fixture(scope="session")
def tiny_conn():
    """21-node hand-written connectome with all role names present."""
    return build_connectome(tiny_rows(), tiny_roles())

"""Train a densely recurrent biological connectome on simulated foraging tasks.

The package couples an evolutionary outer loop with a mesh-adaptive direct
search inner optimizer over small coordinate subsets, benchmarks the hybrid
against evolutionary and evolution-strategy baselines, and exports metrics,
trajectories, and renderings for every run.
"""

__version__ = "0.1.0"

from wormforage.connectome import (
    Connectome,
    Genome,
    NeuronId,
    Synapse,
    SynapseKind,
    l0_distance,
    l2_distance,
    load_connectome,
    save_connectome,
    synthetic_connectome,
)
from wormforage.environment import EnvConfig, EpisodeResult, MotorParams, WormState, run_episode
from wormforage.neural_sim import NetworkState, SimParams
from wormforage.pipelines import PipelineKind, TrainBudget, train

__all__ = [
    "Connectome",
    "EnvConfig",
    "EpisodeResult",
    "Genome",
    "MotorParams",
    "NetworkState",
    "NeuronId",
    "PipelineKind",
    "SimParams",
    "Synapse",
    "SynapseKind",
    "TrainBudget",
    "WormState",
    "l0_distance",
    "l2_distance",
    "load_connectome",
    "run_episode",
    "save_connectome",
    "synthetic_connectome",
    "train",
]

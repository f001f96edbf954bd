"""Packaged synthetic connectome fixtures.

`small` (60 nodes, 400 synapses) keeps tests and demos fast; `full` matches
the real network's scale (368 nodes, 3682 synapses, 68 muscles). Both were
produced by `python -m wormforage.data._generate` and ship with role sidecars.
"""

from importlib import resources
from pathlib import Path

FIXTURES = ("small", "full")


def fixture_path(name: str = "small") -> Path:
    if name not in FIXTURES:
        raise ValueError(f"unknown fixture {name!r} (choose from {FIXTURES})")
    return Path(str(resources.files(__package__).joinpath(f"fixture_{name}.csv")))

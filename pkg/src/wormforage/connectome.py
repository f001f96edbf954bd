"""Connectome data model: nodes, synapses, genomes, and distances from the prior.

The connectome is an immutable directed multigraph. Synapse order is the file's
row order and defines the genome coordinate space, so coordinates stay stable
across save/load cycles and across runs.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

# Role rosters used by the generator and by the shipped fixtures. Loaded files
# may declare any subset of their own nodes in the roles sidecar.
FOOD_SENSORY_NAMES = (
    "ADFL", "ADFR", "ASGR", "ASGL", "ASIL", "ASIR", "ASJR", "ASJL",
)
AVOIDANCE_NAMES = (
    "FLPR", "FLPL", "ASHL", "ASHR", "IL1VL", "IL1VR",
    "OLQDL", "OLQDR", "OLQVR", "OLQVL",
)

# Observed span of contact-count weights; synthetic priors are drawn from it.
WEIGHT_LOW = -13.0
WEIGHT_HIGH = 37.0

_ROLE_KEYS = ("sensory_food", "sensory_avoid", "muscle_left", "muscle_right")
_CSV_HEADER = ("pre", "post", "weight", "kind")


class SynapseKind(Enum):
    """Edge class; the value is the CSV token."""

    CHEMICAL = "chem"
    GAP_JUNCTION = "gap"
    NEUROMUSCULAR = "nmj"


@dataclass(frozen=True)
class NeuronId:
    index: int
    name: str


@dataclass(frozen=True)
class Synapse:
    pre: NeuronId
    post: NeuronId
    base_weight: float
    kind: SynapseKind


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Connectome:
    """Validated network; shareable across workers (all arrays read-only)."""

    neurons: tuple[NeuronId, ...]
    synapses: tuple[Synapse, ...]
    food_sensory: frozenset[str]
    avoidance: frozenset[str]
    muscles_left: frozenset[str]
    muscles_right: frozenset[str]
    # Derived index arrays (row order = genome coordinate order).
    pre_indices: np.ndarray = field(repr=False)
    post_indices: np.ndarray = field(repr=False)
    base_weights: np.ndarray = field(repr=False)
    is_muscle: np.ndarray = field(repr=False)
    food_indices: np.ndarray = field(repr=False)
    avoidance_indices: np.ndarray = field(repr=False)
    muscle_left_indices: np.ndarray = field(repr=False)
    muscle_right_indices: np.ndarray = field(repr=False)
    _name_to_index: dict[str, int] = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.neurons)

    @property
    def n_synapses(self) -> int:
        return len(self.synapses)

    def resolve(self, name: str) -> NeuronId:
        try:
            return self.neurons[self._name_to_index[name]]
        except KeyError:
            raise ValueError(f"unknown neuron name: {name!r}") from None

    def food_neurons(self) -> frozenset[NeuronId]:
        return frozenset(self.neurons[i] for i in self.food_indices)

    def avoidance_neurons(self) -> frozenset[NeuronId]:
        return frozenset(self.neurons[i] for i in self.avoidance_indices)


def build_connectome(
    rows: Sequence[tuple[str, str, float, SynapseKind]],
    roles: Mapping[str, Sequence[str]],
) -> Connectome:
    """Assemble and validate a connectome from raw synapse rows and role lists.

    Node indices are assigned by first appearance over rows (pre before post),
    so identical rows always produce an identical node table.
    """
    if not rows:
        raise ValueError("no synapses")
    for key in _ROLE_KEYS:
        if key not in roles:
            raise ValueError(f"roles sidecar missing key {key!r}")

    name_to_index: dict[str, int] = {}
    for pre, post, _w, _k in rows:
        for name in (pre, post):
            if name not in name_to_index:
                name_to_index[name] = len(name_to_index)
    neurons = tuple(NeuronId(i, n) for n, i in name_to_index.items())

    role_sets: dict[str, frozenset[str]] = {}
    for key in _ROLE_KEYS:
        names = list(roles[key])
        for name in names:
            if name not in name_to_index:
                raise ValueError(f"unknown neuron name in role list {key!r}: {name!r}")
        role_sets[key] = frozenset(names)

    left, right = role_sets["muscle_left"], role_sets["muscle_right"]
    if left & right:
        raise ValueError(f"muscle_left and muscle_right overlap: {sorted(left & right)}")
    muscles = left | right
    sensory = role_sets["sensory_food"] | role_sets["sensory_avoid"]
    if muscles & sensory:
        raise ValueError(f"muscle nodes tagged sensory: {sorted(muscles & sensory)}")

    seen: dict[tuple[str, str, SynapseKind], int] = {}
    gap_pairs: set[tuple[str, str]] = set()
    for line_no, (pre, post, weight, kind) in enumerate(rows, start=2):
        triple = (pre, post, kind)
        if triple in seen:
            raise ValueError(
                f"line {line_no}: duplicate synapse ({pre},{post},{kind.value}),"
                f" first seen at line {seen[triple]}"
            )
        seen[triple] = line_no
        if not np.isfinite(weight):
            raise ValueError(f"line {line_no}: non-finite weight {weight!r}")
        if kind is SynapseKind.NEUROMUSCULAR and post not in muscles:
            raise ValueError(
                f"line {line_no}: neuromuscular synapse targets non-muscle node {post!r}"
            )
        if kind is SynapseKind.GAP_JUNCTION:
            gap_pairs.add((pre, post))
    for pre, post in gap_pairs:
        if (post, pre) not in gap_pairs:
            raise ValueError(
                f"gap junction ({pre},{post}) lacks its reverse edge ({post},{pre})"
            )

    synapses = tuple(
        Synapse(neurons[name_to_index[pre]], neurons[name_to_index[post]], float(w), kind)
        for pre, post, w, kind in rows
    )
    is_muscle = np.zeros(len(neurons), dtype=bool)
    for name in muscles:
        is_muscle[name_to_index[name]] = True

    def indices_of(names: frozenset[str]) -> np.ndarray:
        return _readonly(np.array(sorted(name_to_index[n] for n in names), dtype=np.int64))

    return Connectome(
        neurons=neurons,
        synapses=synapses,
        food_sensory=role_sets["sensory_food"],
        avoidance=role_sets["sensory_avoid"],
        muscles_left=left,
        muscles_right=right,
        pre_indices=_readonly(np.array([name_to_index[r[0]] for r in rows], dtype=np.int64)),
        post_indices=_readonly(np.array([name_to_index[r[1]] for r in rows], dtype=np.int64)),
        base_weights=_readonly(np.array([r[2] for r in rows], dtype=np.float64)),
        is_muscle=_readonly(is_muscle),
        food_indices=indices_of(role_sets["sensory_food"]),
        avoidance_indices=indices_of(role_sets["sensory_avoid"]),
        muscle_left_indices=indices_of(left),
        muscle_right_indices=indices_of(right),
        _name_to_index=name_to_index,
    )


def default_roles_path(path: Path) -> Path:
    return path.with_suffix(".roles.json")


def load_connectome(path: str | Path, roles_path: str | Path | None = None) -> Connectome:
    """Load a connectome CSV (`pre,post,weight,kind`) plus its roles sidecar."""
    path = Path(path)
    roles_path = default_roles_path(path) if roles_path is None else Path(roles_path)
    rows: list[tuple[str, str, float, SynapseKind]] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path.name}: no synapses")
        if tuple(h.strip() for h in header) != _CSV_HEADER:
            raise ValueError(
                f"{path.name} line 1: expected header {','.join(_CSV_HEADER)!r},"
                f" got {','.join(header)!r}"
            )
        for line_no, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != 4:
                raise ValueError(
                    f"{path.name} line {line_no}: expected 4 fields, got {len(record)}"
                )
            pre, post, weight_s, kind_s = (f.strip() for f in record)
            try:
                weight = float(weight_s)
            except ValueError:
                raise ValueError(
                    f"{path.name} line {line_no}: bad weight {weight_s!r}"
                ) from None
            try:
                kind = SynapseKind(kind_s)
            except ValueError:
                raise ValueError(
                    f"{path.name} line {line_no}: bad kind {kind_s!r}"
                    f" (expected one of {', '.join(k.value for k in SynapseKind)})"
                ) from None
            rows.append((pre, post, weight, kind))
    if not rows:
        raise ValueError(f"{path.name}: no synapses")
    with open(roles_path, encoding="utf-8") as fh:
        roles = json.load(fh)
    if not isinstance(roles, dict):
        raise ValueError(f"{roles_path.name}: roles sidecar must be a JSON object")
    return build_connectome(rows, roles)


def save_connectome(
    conn: Connectome,
    path: str | Path,
    roles_path: str | Path | None = None,
    weights: np.ndarray | None = None,
) -> None:
    """Write the CSV + roles sidecar; `weights` substitutes the weight column.

    Floats are written with repr so a save → load → save cycle is byte-identical.
    """
    path = Path(path)
    roles_path = default_roles_path(path) if roles_path is None else Path(roles_path)
    col = conn.base_weights if weights is None else np.asarray(weights, dtype=np.float64)
    if col.shape != (conn.n_synapses,):
        raise ValueError(f"weight column shape {col.shape} != ({conn.n_synapses},)")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(_CSV_HEADER) + "\n")
        for s, syn in enumerate(conn.synapses):
            fh.write(f"{syn.pre.name},{syn.post.name},{float(col[s])!r},{syn.kind.value}\n")
    roles = {
        "sensory_food": sorted(conn.food_sensory),
        "sensory_avoid": sorted(conn.avoidance),
        "muscle_left": sorted(conn.muscles_left),
        "muscle_right": sorted(conn.muscles_right),
    }
    with open(roles_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(roles, fh, indent=2)
        fh.write("\n")


def synthetic_connectome(
    seed: int,
    n_neurons: int,
    n_synapses: int,
    n_muscles: int | None = None,
) -> Connectome:
    """Generate a deterministic test connectome hosting every role-tagged name.

    Guarantees a sensory → interneuron → muscle backbone (each sensory node has
    an out-edge, each muscle an in-edge) so the prior is behaviorally live, then
    fills to exactly `n_synapses` rows with random chemical edges, neuromuscular
    edges, and bidirectional gap-junction pairs. Weights ~ U(-13, 37).
    """
    n_roles = len(FOOD_SENSORY_NAMES) + len(AVOIDANCE_NAMES)
    if n_neurons < n_roles + 2:
        raise ValueError(
            f"n_neurons too small: need >= {n_roles + 2} to host the {n_roles}"
            f" sensory names plus one muscle per side, got {n_neurons}"
        )
    avail = n_neurons - n_roles
    if n_muscles is None:
        n_muscles = max(2, min(avail, n_neurons // 5) // 2 * 2)
    if n_muscles < 2 or n_muscles % 2 or n_muscles > avail:
        raise ValueError(f"n_muscles must be even, >= 2 and <= {avail}, got {n_muscles}")

    sensory = list(FOOD_SENSORY_NAMES + AVOIDANCE_NAMES)
    n_inter = n_neurons - n_roles - n_muscles
    inter = [f"IN{i:03d}" for i in range(n_inter)]
    half = n_muscles // 2
    m_left = [f"MDL{i + 1:02d}" for i in range(half)]
    m_right = [f"MDR{i + 1:02d}" for i in range(half)]
    muscles = m_left + m_right
    non_muscle = sensory + inter

    rng = np.random.default_rng(seed)
    rows: list[tuple[str, str, SynapseKind]] = []
    seen: set[tuple[str, str, SynapseKind]] = set()

    def add(pre: str, post: str, kind: SynapseKind) -> bool:
        triple = (pre, post, kind)
        if triple in seen:
            return False
        seen.add(triple)
        rows.append(triple)
        return True

    def pick(pool: Sequence[str], exclude: str | None = None) -> str:
        for _ in range(1000):
            name = pool[int(rng.integers(len(pool)))]
            if name != exclude:
                return name
        raise RuntimeError("failed to draw a distinct node")

    inner = inter if inter else muscles
    for s in sensory:
        post = pick(inner, exclude=s)
        add(s, post, SynapseKind.NEUROMUSCULAR if post in muscles else SynapseKind.CHEMICAL)
    for i in inter:
        post = pick(inter + muscles, exclude=i)
        add(i, post, SynapseKind.NEUROMUSCULAR if post in muscles else SynapseKind.CHEMICAL)
    covered = {post for _pre, post, _k in rows}
    for m in muscles:
        if m not in covered:
            add(pick(non_muscle), m, SynapseKind.NEUROMUSCULAR)

    if n_synapses < len(rows):
        raise ValueError(
            f"n_synapses too small for role coverage: need >= {len(rows)}, got {n_synapses}"
        )
    while len(rows) < n_synapses:
        if rng.random() < 0.1 and n_synapses - len(rows) >= 2 and len(non_muscle) >= 2:
            a = pick(non_muscle)
            b = pick(non_muscle, exclude=a)
            if (a, b, SynapseKind.GAP_JUNCTION) in seen or (b, a, SynapseKind.GAP_JUNCTION) in seen:
                continue
            add(a, b, SynapseKind.GAP_JUNCTION)
            add(b, a, SynapseKind.GAP_JUNCTION)
        else:
            pre = pick(non_muscle)
            post = pick(non_muscle + muscles, exclude=pre)
            kind = SynapseKind.NEUROMUSCULAR if post in muscles else SynapseKind.CHEMICAL
            add(pre, post, kind)

    weights = rng.uniform(WEIGHT_LOW, WEIGHT_HIGH, size=len(rows))
    full_rows = [(pre, post, float(w), kind) for (pre, post, kind), w in zip(rows, weights)]
    roles = {
        "sensory_food": list(FOOD_SENSORY_NAMES),
        "sensory_avoid": list(AVOIDANCE_NAMES),
        "muscle_left": m_left,
        "muscle_right": m_right,
    }
    return build_connectome(full_rows, roles)


@dataclass(frozen=True, eq=False)
class Genome:
    """A full weight vector plus its deviation set from the prior.

    `dirty` is maintained incrementally by `with_values` and must always equal
    {s : weights[s] != prior[s]}; `audit_dirty` recomputes it by full scan.
    """

    weights: np.ndarray
    prior: np.ndarray
    dirty: frozenset[int]

    @classmethod
    def from_prior(cls, conn: Connectome) -> "Genome":
        return cls(conn.base_weights, conn.base_weights, frozenset())

    @classmethod
    def from_weights(cls, weights: np.ndarray, prior: np.ndarray) -> "Genome":
        weights = _readonly(np.array(weights, dtype=np.float64))
        prior = np.asarray(prior, dtype=np.float64)
        if weights.shape != prior.shape:
            raise ValueError(f"weights shape {weights.shape} != prior shape {prior.shape}")
        dirty = frozenset(int(i) for i in np.nonzero(weights != prior)[0])
        return cls(weights, prior, dirty)

    def __len__(self) -> int:
        return self.weights.shape[0]

    def with_values(self, indices: Iterable[int], values: Iterable[float]) -> "Genome":
        """Return a copy with `weights[indices] = values`, dirty set updated."""
        idx = np.asarray(list(indices), dtype=np.int64)
        vals = np.asarray(list(values), dtype=np.float64)
        if idx.shape != vals.shape:
            raise ValueError(f"{idx.size} indices but {vals.size} values")
        if idx.size and (idx.min() < 0 or idx.max() >= len(self)):
            raise ValueError("coordinate index out of range")
        new = self.weights.copy()
        new[idx] = vals
        touched = {int(i) for i in idx}
        now_dirty = {int(i) for i in idx if new[i] != self.prior[i]}
        return Genome(_readonly(new), self.prior, (self.dirty - touched) | now_dirty)

    def audit_dirty(self) -> frozenset[int]:
        return frozenset(int(i) for i in np.nonzero(self.weights != self.prior)[0])


def l0_distance(a: Genome, b: Genome) -> int:
    """Number of coordinates on which the two genomes differ."""
    if len(a) != len(b):
        raise ValueError(f"genome lengths differ: {len(a)} vs {len(b)}")
    return int(np.count_nonzero(a.weights != b.weights))


def l2_distance(a: Genome, b: Genome) -> float:
    """Euclidean distance between the two weight vectors."""
    if len(a) != len(b):
        raise ValueError(f"genome lengths differ: {len(a)} vs {len(b)}")
    return float(np.linalg.norm(a.weights - b.weights))

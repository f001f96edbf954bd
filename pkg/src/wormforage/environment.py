"""2-D foraging world: motor integration, sensing, reward, and episode runs.

`run_episode` is a pure function of its arguments; any number of episodes can
run in parallel with no shared state. The default execution path is a compiled
kernel; `_run_episode_python` composes the public step operations and is kept
bit-identical to the kernel (enforced by tests).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from wormforage._kernel import episode_kernel
from wormforage.connectome import Connectome, Genome, NeuronId
from wormforage.neural_sim import (
    SimParams,
    force_fire,
    muscle_activity,
    reset_state,
    step_network,
)

_TWO_PI = 2.0 * math.pi

# Named polygon tasks; "custom" takes positions from EnvConfig.custom_food.
POLYGON_SIDES = {
    "triangle": 3,
    "square": 4,
    "pentagon": 5,
    "hexagon": 6,
    "heptagon": 7,
    "octagon": 8,
}


@dataclass(frozen=True)
class MotorParams:
    k_a: float = 0.1
    k_l: float = 0.14
    v_min: float = 10.7
    v_max: float = 21.4

    def __post_init__(self) -> None:
        if not 0 < self.v_min < self.v_max:
            raise ValueError(f"need 0 < v_min < v_max, got ({self.v_min}, {self.v_max})")


@dataclass(frozen=True)
class EnvConfig:
    width: float = 1600.0
    height: float = 1200.0
    n_food: int = 36
    episode_steps: int = 250
    detection_range: float = 150.0
    consumption_range: float = 20.0
    wall_cutoff: float = 100.0
    r_full: float = 30.0
    r_partial: float = 1.0 / 30.0
    layout: str = "pentagon"
    layout_radius: float = 450.0
    custom_food: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self) -> None:
        if not self.consumption_range < self.detection_range:
            raise ValueError("consumption_range must be < detection_range")
        if not self.wall_cutoff < min(self.width, self.height) / 2:
            raise ValueError("wall_cutoff must be < half the smaller arena side")
        if self.layout != "custom" and self.layout not in POLYGON_SIDES:
            raise ValueError(
                f"unknown layout {self.layout!r}; expected one of"
                f" {sorted(POLYGON_SIDES)} or 'custom'"
            )
        if self.layout == "custom" and self.custom_food is None:
            raise ValueError("layout 'custom' requires custom_food positions")
        if self.custom_food is not None and len(self.custom_food) != self.n_food:
            raise ValueError(
                f"custom_food has {len(self.custom_food)} positions, n_food is {self.n_food}"
            )
        if self.n_food < 1 or self.episode_steps < 0:
            raise ValueError("n_food must be >= 1 and episode_steps >= 0")


@dataclass(frozen=True)
class FoodLayout:
    positions: np.ndarray  # shape (n_food, 2), read-only

    @property
    def n_food(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class WormState:
    x: float
    y: float
    theta: float  # radians in [0, 2*pi)


@dataclass(frozen=True)
class EpisodeResult:
    fitness: float
    food_eaten: int
    trajectory: np.ndarray  # (episode_steps + 1, 4): t, x, y, theta
    reward_series: np.ndarray  # (episode_steps,)
    eaten_events: tuple[tuple[int, int], ...]  # (step, food index), step order
    fired_history: np.ndarray | None = None  # (episode_steps, n_nodes) if recorded


def _check_margin(positions: np.ndarray, cfg: EnvConfig, context: str) -> None:
    x, y = positions[:, 0], positions[:, 1]
    margin = np.minimum.reduce([x, cfg.width - x, y, cfg.height - y])
    if not np.all(margin > cfg.wall_cutoff):
        raise ValueError(f"{context}: food position closer than {cfg.wall_cutoff} to a wall")


def polygon_layout(n_sides: int, cfg: EnvConfig) -> FoodLayout:
    """`cfg.n_food` points spread evenly along a regular polygon's perimeter.

    The polygon is centered on the arena, circumradius `cfg.layout_radius`,
    first vertex pointing up; point i sits at perimeter fraction i / n_food.
    """
    if not 3 <= n_sides <= 8:
        raise ValueError(f"n_sides must be in [3, 8], got {n_sides}")
    cx, cy = cfg.width / 2.0, cfg.height / 2.0
    angles = math.pi / 2 + 2.0 * math.pi * np.arange(n_sides) / n_sides
    vx = cx + cfg.layout_radius * np.cos(angles)
    vy = cy + cfg.layout_radius * np.sin(angles)
    pts = np.zeros((cfg.n_food, 2), dtype=np.float64)
    for i in range(cfg.n_food):
        u = (i * n_sides) / cfg.n_food  # edge coordinate in [0, n_sides)
        k = int(u)
        frac = u - k
        k2 = (k + 1) % n_sides
        pts[i, 0] = vx[k] + frac * (vx[k2] - vx[k])
        pts[i, 1] = vy[k] + frac * (vy[k2] - vy[k])
    _check_margin(pts, cfg, "polygon too large for wall margin")
    pts.setflags(write=False)
    return FoodLayout(pts)


@lru_cache(maxsize=64)
def _layout_cached(cfg: EnvConfig) -> FoodLayout:
    if cfg.layout == "custom":
        pts = np.array(cfg.custom_food, dtype=np.float64).reshape(cfg.n_food, 2)
        _check_margin(pts, cfg, "custom layout")
        pts.setflags(write=False)
        return FoodLayout(pts)
    return polygon_layout(POLYGON_SIDES[cfg.layout], cfg)


def food_layout(cfg: EnvConfig) -> FoodLayout:
    """Food positions for the configured task."""
    return _layout_cached(cfg)


def motor_update(
    w: WormState, a_left: float, a_right: float, p: MotorParams, cfg: EnvConfig
) -> WormState:
    """Turn by the muscle imbalance, advance by the clamped absolute speed.

    The boundary is absorbing: positions clamp to the arena rectangle.
    """
    omega = p.k_a * (a_left - a_right)
    v_raw = p.k_l * (a_left + a_right)
    speed = abs(v_raw)
    if speed < p.v_min:
        speed = p.v_min
    elif speed > p.v_max:
        speed = p.v_max
    theta = math.fmod(w.theta + omega, _TWO_PI)
    if theta < 0.0:
        theta += _TWO_PI
    if theta >= _TWO_PI:
        theta -= _TWO_PI
    x = w.x + speed * math.cos(theta)
    if x < 0.0:
        x = 0.0
    elif x > cfg.width:
        x = cfg.width
    y = w.y + speed * math.sin(theta)
    if y < 0.0:
        y = 0.0
    elif y > cfg.height:
        y = cfg.height
    return WormState(x, y, theta)


def sense(
    w: WormState,
    food: FoodLayout,
    cfg: EnvConfig,
    conn: Connectome,
    remaining: np.ndarray | None = None,
) -> frozenset[NeuronId]:
    """Food-sensory set if any remaining food is in detection range, plus the
    avoidance set if any wall is nearer than the cutoff; empty otherwise."""
    ids: set[NeuronId] = set()
    food_near = False
    for i in range(food.n_food):
        if remaining is not None and not remaining[i]:
            continue
        dx = w.x - food.positions[i, 0]
        dy = w.y - food.positions[i, 1]
        if math.sqrt(dx * dx + dy * dy) < cfg.detection_range:
            food_near = True
            break
    if food_near:
        ids.update(conn.food_neurons())
    if (
        w.x < cfg.wall_cutoff
        or (cfg.width - w.x) < cfg.wall_cutoff
        or w.y < cfg.wall_cutoff
        or (cfg.height - w.y) < cfg.wall_cutoff
    ):
        ids.update(conn.avoidance_neurons())
    return frozenset(ids)


def reward(
    w: WormState,
    food: FoodLayout,
    cfg: EnvConfig,
    remaining: np.ndarray | None = None,
) -> tuple[float, list[int]]:
    """Per-step reward and the indices eaten this step (caller removes them).

    Distance d to each remaining food contributes the full reward for d below
    the consumption range (d = 0 included) and a linearly decaying partial
    reward up to the detection range (d = consumption_range included).
    """
    r = 0.0
    eaten: list[int] = []
    for i in range(food.n_food):
        if remaining is not None and not remaining[i]:
            continue
        dx = w.x - food.positions[i, 0]
        dy = w.y - food.positions[i, 1]
        d = math.sqrt(dx * dx + dy * dy)
        if d < cfg.consumption_range:
            r += cfg.r_full
            eaten.append(i)
        elif d < cfg.detection_range:
            r += cfg.r_partial * (cfg.detection_range - d) / cfg.detection_range
    return r, eaten


def _initial_pose(cfg: EnvConfig, seed: int) -> WormState:
    # The start position is the arena center; only the heading comes from seed.
    theta0 = float(np.random.default_rng(seed).uniform(0.0, _TWO_PI))
    return WormState(cfg.width / 2.0, cfg.height / 2.0, theta0)


def run_episode(
    genome: Genome,
    conn: Connectome,
    cfg: EnvConfig,
    sim: SimParams,
    seed: int,
    motor: MotorParams = MotorParams(),
    record_activity: bool = False,
) -> EpisodeResult:
    """Evaluate one genome on one task episode; deterministic in all arguments."""
    if len(genome) != conn.n_synapses:
        raise ValueError(f"genome length {len(genome)} != synapse count {conn.n_synapses}")
    layout = food_layout(cfg)
    start = _initial_pose(cfg, seed)
    traj, rewards, eaten_step, fired_hist, fitness = episode_kernel(
        genome.weights,
        conn.pre_indices,
        conn.post_indices,
        conn.is_muscle,
        conn.muscle_left_indices,
        conn.muscle_right_indices,
        conn.food_indices,
        conn.avoidance_indices,
        layout.positions[:, 0].copy(),
        layout.positions[:, 1].copy(),
        cfg.width,
        cfg.height,
        cfg.episode_steps,
        cfg.detection_range,
        cfg.consumption_range,
        cfg.wall_cutoff,
        cfg.r_full,
        cfg.r_partial,
        motor.k_a,
        motor.k_l,
        motor.v_min,
        motor.v_max,
        sim.fire_threshold,
        start.x,
        start.y,
        start.theta,
        record_activity,
    )
    events = sorted(
        (int(eaten_step[i]), i) for i in range(layout.n_food) if eaten_step[i] >= 0
    )
    return EpisodeResult(
        fitness=float(fitness),
        food_eaten=len(events),
        trajectory=traj,
        reward_series=rewards,
        eaten_events=tuple(events),
        fired_history=fired_hist if record_activity else None,
    )


def _run_episode_python(
    genome: Genome,
    conn: Connectome,
    cfg: EnvConfig,
    sim: SimParams,
    seed: int,
    motor: MotorParams = MotorParams(),
    record_activity: bool = False,
) -> EpisodeResult:
    """Reference path composing the public ops; must match the kernel bit-for-bit."""
    layout = food_layout(cfg)
    worm = _initial_pose(cfg, seed)
    state = reset_state(conn)
    remaining = np.ones(layout.n_food, dtype=bool)
    n = cfg.episode_steps
    traj = np.zeros((n + 1, 4), dtype=np.float64)
    rewards = np.zeros(n, dtype=np.float64)
    fired_hist = np.zeros((n, conn.n_nodes), dtype=bool) if record_activity else None
    traj[0] = (0.0, worm.x, worm.y, worm.theta)
    fitness = 0.0
    events: list[tuple[int, int]] = []
    for t in range(1, n + 1):
        ids = sense(worm, layout, cfg, conn, remaining)
        state = force_fire(state, ids, conn)
        state = step_network(state, genome, conn, sim)
        if record_activity:
            fired_hist[t - 1] = state.fired
        a_left, a_right = muscle_activity(state, conn)
        worm = motor_update(worm, a_left, a_right, motor, cfg)
        r, eaten = reward(worm, layout, cfg, remaining)
        for i in eaten:
            remaining[i] = False
            events.append((t, i))
        rewards[t - 1] = r
        fitness += r
        traj[t] = (float(t), worm.x, worm.y, worm.theta)
    return EpisodeResult(
        fitness=fitness,
        food_eaten=len(events),
        trajectory=traj,
        reward_series=rewards,
        eaten_events=tuple(events),
        fired_history=fired_hist,
    )


def trajectory_to_csv(result: EpisodeResult, path: str | Path) -> None:
    """Write `t,x,y,theta,reward` rows; the t=0 row carries reward 0."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,x,y,theta,reward\n")
        for t in range(result.trajectory.shape[0]):
            _, x, y, theta = (float(v) for v in result.trajectory[t])
            r = 0.0 if t == 0 else float(result.reward_series[t - 1])
            fh.write(f"{t},{x!r},{y!r},{theta!r},{r!r}\n")


def layout_to_csv(layout: FoodLayout, path: str | Path) -> None:
    """Write `food_id,x,y` rows."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("food_id,x,y\n")
        for i in range(layout.n_food):
            x, y = float(layout.positions[i, 0]), float(layout.positions[i, 1])
            fh.write(f"{i},{x!r},{y!r}\n")


def export_episode(
    result: EpisodeResult, cfg: EnvConfig, base: str | Path
) -> tuple[Path, Path]:
    """Write `<base>.csv` (trajectory) and `<base>.meta.json` (world context).

    The meta file carries everything the SVG renderer needs: arena size, food
    positions, per-food consumption step (-1 if uneaten), and ranges.
    """
    base = Path(base)
    csv_path = base.with_suffix(".csv")
    meta_path = base.with_suffix(".meta.json")
    layout = food_layout(cfg)
    eaten_by_food = {i: -1 for i in range(layout.n_food)}
    for step, i in result.eaten_events:
        eaten_by_food[i] = step
    trajectory_to_csv(result, csv_path)
    meta = {
        "width": cfg.width,
        "height": cfg.height,
        "consumption_range": cfg.consumption_range,
        "detection_range": cfg.detection_range,
        "fitness": result.fitness,
        "food_eaten": result.food_eaten,
        "food": [
            {
                "food_id": i,
                "x": float(layout.positions[i, 0]),
                "y": float(layout.positions[i, 1]),
                "eaten_step": eaten_by_food[i],
            }
            for i in range(layout.n_food)
        ],
    }
    with open(meta_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    return csv_path, meta_path

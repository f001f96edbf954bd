"""Compiled whole-episode loop.

This is a performance fast path only: every arithmetic expression is written in
the same order as the pure-Python composition of the public operations in
`neural_sim` and `environment`, and the test suite asserts bit-identical
results between the two routes.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_TWO_PI = 2.0 * math.pi


@njit(cache=True)
def episode_kernel(
    weights: np.ndarray,
    pre: np.ndarray,
    post: np.ndarray,
    is_muscle: np.ndarray,
    left_idx: np.ndarray,
    right_idx: np.ndarray,
    food_node_idx: np.ndarray,
    avoid_node_idx: np.ndarray,
    food_x: np.ndarray,
    food_y: np.ndarray,
    width: float,
    height: float,
    n_steps: int,
    detection: float,
    consumption: float,
    wall_cutoff: float,
    r_full: float,
    r_partial: float,
    k_a: float,
    k_l: float,
    v_min: float,
    v_max: float,
    threshold: float,
    x0: float,
    y0: float,
    theta0: float,
    record_fired: bool,
):
    n = is_muscle.size
    n_syn = weights.size
    nf = food_x.size

    v = np.zeros(n, dtype=np.float64)
    fired = np.zeros(n, dtype=np.bool_)
    forced = np.zeros(n, dtype=np.bool_)
    remaining = np.ones(nf, dtype=np.bool_)
    eaten_step = np.full(nf, -1, dtype=np.int64)
    traj = np.zeros((n_steps + 1, 4), dtype=np.float64)
    rewards = np.zeros(n_steps, dtype=np.float64)
    if record_fired:
        fired_hist = np.zeros((n_steps, n), dtype=np.bool_)
    else:
        fired_hist = np.zeros((0, n), dtype=np.bool_)

    x = x0
    y = y0
    theta = theta0
    traj[0, 1] = x
    traj[0, 2] = y
    traj[0, 3] = theta
    fitness = 0.0

    for t in range(1, n_steps + 1):
        # Sense at the pre-step position.
        food_near = False
        for i in range(nf):
            if remaining[i]:
                dx = x - food_x[i]
                dy = y - food_y[i]
                if math.sqrt(dx * dx + dy * dy) < detection:
                    food_near = True
                    break
        wall_near = (
            x < wall_cutoff
            or (width - x) < wall_cutoff
            or y < wall_cutoff
            or (height - y) < wall_cutoff
        )
        if food_near:
            for j in food_node_idx:
                forced[j] = True
        if wall_near:
            for j in avoid_node_idx:
                forced[j] = True

        # Synchronous network step: accumulate in row order, threshold, reset.
        vn = v.copy()
        for s in range(n_syn):
            if fired[pre[s]]:
                vn[post[s]] += weights[s]
        new_fired = np.zeros(n, dtype=np.bool_)
        for k in range(n):
            if (vn[k] >= threshold and not is_muscle[k]) or forced[k]:
                new_fired[k] = True
                vn[k] = 0.0
        v = vn
        fired = new_fired
        for k in range(n):
            forced[k] = False
        if record_fired:
            for k in range(n):
                fired_hist[t - 1, k] = fired[k]

        # Muscle readout: sum per side in ascending index order, then zero.
        a_left = 0.0
        for j in left_idx:
            a_left += v[j]
        a_right = 0.0
        for j in right_idx:
            a_right += v[j]
        for j in left_idx:
            v[j] = 0.0
        for j in right_idx:
            v[j] = 0.0

        # Motor integration with absorbing boundary.
        omega = k_a * (a_left - a_right)
        v_raw = k_l * (a_left + a_right)
        speed = abs(v_raw)
        if speed < v_min:
            speed = v_min
        elif speed > v_max:
            speed = v_max
        # np.fmod == math.fmod bit-for-bit (IEEE fmod is exact); numba lacks math.fmod.
        theta = np.fmod(theta + omega, _TWO_PI)
        if theta < 0.0:
            theta += _TWO_PI
        if theta >= _TWO_PI:
            theta -= _TWO_PI
        x = x + speed * math.cos(theta)
        if x < 0.0:
            x = 0.0
        elif x > width:
            x = width
        y = y + speed * math.sin(theta)
        if y < 0.0:
            y = 0.0
        elif y > height:
            y = height

        # Reward at the post-step position; eaten food leaves the world.
        r = 0.0
        for i in range(nf):
            if remaining[i]:
                dx = x - food_x[i]
                dy = y - food_y[i]
                d = math.sqrt(dx * dx + dy * dy)
                if d < consumption:
                    r += r_full
                    remaining[i] = False
                    eaten_step[i] = t
                elif d < detection:
                    r += r_partial * (detection - d) / detection
        rewards[t - 1] = r
        fitness += r
        traj[t, 0] = float(t)
        traj[t, 1] = x
        traj[t, 2] = y
        traj[t, 3] = theta

    return traj, rewards, eaten_step, fired_hist, fitness

"""Ground truth for the surrogate: exhaustive schedules, Pareto fronts, estimate deviations."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .deepdraw import SurrogateParams, all_schedules, final_process_state, scale_rewards
from .env import HORIZON, RewardVector
from .morl import EpisodeLog, scalarize_reward


class ScheduleOutcome(NamedTuple):
    schedule: tuple
    reward: RewardVector
    scalarized: float | None = None


class DeviationRecord(NamedTuple):
    episode: int
    t: int
    expected: float
    actual: float
    deviation: float


def schedule_rewards(friction: float, params: SurrogateParams | None = None) -> tuple[np.ndarray, np.ndarray]:
    """All schedules (lexicographic) and their noise-free reward vectors as arrays."""
    if not friction > 0:
        raise ValueError(f"friction must be positive, got {friction}")
    p = (params or SurrogateParams()).calibrated()
    schedules = all_schedules()
    infeed, thickness = final_process_state(schedules, friction, p)
    r1, r2 = scale_rewards(-infeed, thickness, p.reward_calibration)
    return schedules, np.column_stack([r1, r2])


def enumerate_schedules(friction: float, params: SurrogateParams | None = None) -> list[ScheduleOutcome]:
    schedules, rewards = schedule_rewards(friction, params)
    return [ScheduleOutcome(tuple(int(a) for a in s), RewardVector(float(r[0]), float(r[1])))
            for s, r in zip(schedules, rewards)]


def front_mask(rewards: np.ndarray) -> np.ndarray:
    """Boolean mask of non-dominated rows (maximisation in both columns).

    Sort by first component descending; within a tie group only the rows
    attaining the group's best second component can survive, and only if
    that beats everything with a strictly larger first component.
    """
    rewards = np.asarray(rewards, dtype=float)
    order = np.lexsort((-rewards[:, 1], -rewards[:, 0]))
    mask = np.zeros(len(rewards), dtype=bool)
    best_prev = -np.inf
    i = 0
    while i < len(order):
        j = i
        r1 = rewards[order[i], 0]
        while j < len(order) and rewards[order[j], 0] == r1:
            j += 1
        group = order[i:j]
        top = rewards[group[0], 1]
        if top > best_prev:
            mask[group[rewards[group, 1] == top]] = True
            best_prev = top
        i = j
    return mask


def pareto_front(outcomes: list[ScheduleOutcome]) -> list[ScheduleOutcome]:
    """Non-dominated outcomes ordered by (reward1 desc, reward2 desc); duplicates kept."""
    if not outcomes:
        raise ValueError("pareto_front of an empty outcome list")
    rewards = np.array([o.reward for o in outcomes], dtype=float)
    keep = np.flatnonzero(front_mask(rewards))
    keep = keep[np.lexsort((keep, -rewards[keep, 1], -rewards[keep, 0]))]
    return [outcomes[k] for k in keep]


def dominated_by_any(points: np.ndarray, candidates: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """For each point, whether some candidate weakly dominates it with one strict inequality.

    Direct pairwise comparison; used to cross-check :func:`front_mask`.
    """
    points = np.asarray(points, dtype=float)
    candidates = np.asarray(candidates, dtype=float)
    out = np.zeros(len(points), dtype=bool)
    c1, c2 = candidates[:, 0], candidates[:, 1]
    for start in range(0, len(points), chunk):
        p = points[start:start + chunk]
        ge = (c1[None, :] >= p[:, :1]) & (c2[None, :] >= p[:, 1:2])
        gt = (c1[None, :] > p[:, :1]) | (c2[None, :] > p[:, 1:2])
        out[start:start + chunk] = np.any(ge & gt, axis=1)
    return out


def compute_deviations(logs: list[EpisodeLog], w=None) -> list[DeviationRecord]:
    """Scalarized step-t estimate minus scalarized terminal reward, per (episode, t).

    ``w`` defaults to the weights recorded in each log row.
    """
    records = []
    for log in logs:
        expected = getattr(log, "expected_h", None)
        if expected is None or len(expected) != HORIZON or any(e is None for e in expected):
            raise ValueError(f"episode {log.episode_index}: missing per-step expectation fields")
        weights = w if w is not None else log.weights
        actual = float(scalarize_reward(log.reward, weights))
        for t, e in enumerate(expected):
            records.append(DeviationRecord(log.episode_index, t, float(e), actual, float(e) - actual))
    return records

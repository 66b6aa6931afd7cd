"""Fixed-horizon episodic control abstractions.

Every episode consists of exactly ``HORIZON`` decisions. An observation is
emitted before the first action and after every action, so a finished
trajectory carries ``HORIZON + 1`` observations. Rewards are vector-valued
and only non-zero on the terminal step.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Protocol

import numpy as np

HORIZON = 5
N_ACTIONS = 7
FORCES = tuple(20.0 + 20.0 * i for i in range(N_ACTIONS))  # kN
MAX_FORCE = FORCES[-1]


class EpisodeExhausted(RuntimeError):
    pass


def action_force(index: int) -> float:
    """Blank-holder force in kN for an action index."""
    if not 0 <= index < N_ACTIONS:
        raise ValueError(f"action index out of range: {index}")
    return FORCES[index]


def force_action(force: float) -> int:
    index = int(round((force - 20.0) / 20.0))
    if not 0 <= index < N_ACTIONS or FORCES[index] != force:
        raise ValueError(f"not a valid blank-holder force: {force}")
    return index


class RewardVector(NamedTuple):
    infeed: float
    thickness: float


ZERO_REWARD = RewardVector(0.0, 0.0)


class Observation(NamedTuple):
    stamp_force: float  # kN
    blank_infeed_x: float  # mm
    blankholder_offset_y: float  # mm


@dataclass
class Trajectory:
    observations: list[Observation] = field(default_factory=list)
    actions: list[int] = field(default_factory=list)
    reward: RewardVector | None = None
    friction_used: float = float("nan")

    @property
    def complete(self) -> bool:
        return len(self.actions) == HORIZON and self.reward is not None


class FixedHorizonEnv(Protocol):
    """Contract for simulators driven by :func:`rollout`."""

    def reset(self) -> Observation: ...

    def step(self, action: int) -> tuple[Observation, RewardVector, bool]: ...


def rollout(env: FixedHorizonEnv, policy) -> Trajectory:
    """Run one episode, calling ``policy(t, observations, actions)`` per step."""
    traj = Trajectory()
    traj.observations.append(env.reset())
    terminal = False
    while not terminal:
        t = len(traj.actions)
        a = int(policy(t, traj.observations, traj.actions))
        obs, reward, terminal = env.step(a)
        traj.actions.append(a)
        traj.observations.append(obs)
        if terminal:
            traj.reward = reward
    traj.friction_used = getattr(env, "friction", float("nan"))
    return traj


def as_array(reward: RewardVector) -> np.ndarray:
    return np.array(reward, dtype=float)

"""Analytic surrogate of a deep-drawing process with blank-holder-force control.

The surrogate keeps the mechanism that makes the control problem
two-objective: restraint at the flange is the product of friction and
blank-holder force. High restraint reduces material infeed (good for
material efficiency) but forces the punch to stretch the wall instead,
which thins it (bad for stability). Per control interval::

    r       = mu * F
    infeed += D * exp(-r / r0)
    stretch = D - that increment
    thick  *= 1 - c_s * stretch

Friction is drawn once per episode from a scaled Beta(3, 15).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, fields, replace
from functools import lru_cache

import numpy as np

from .env import (
    FORCES,
    HORIZON,
    N_ACTIONS,
    ZERO_REWARD,
    EpisodeExhausted,
    Observation,
    RewardVector,
)

CALIBRATION_FRICTIONS = tuple(round(0.005 * k, 3) for k in range(1, 13))


@dataclass(frozen=True)
class SurrogateParams:
    draw_demand: float = 1.0  # mm per control interval
    restraint_scale: float = 1.5  # kN
    thinning_coeff: float = 0.08  # 1/mm
    force_gain: float = 10.0
    stretch_force_coeff: float = 5.0  # kN/mm
    holder_stiffness: float = 1000.0  # kN/mm
    friction_scale: float = 0.2
    friction_alpha: float = 3.0
    friction_beta: float = 15.0
    initial_thickness: float = 1.0
    # documented value ranges of (stamp_force, blank_infeed_x, blankholder_offset_y)
    obs_ranges: tuple = ((0.0, 140.0), (0.0, 5.0), (0.0, 0.14))
    noise_fractions: tuple = (0.005, 0.005, 0.0025)
    # ((min, max) of -infeed, (min, max) of thickness); None -> calibrate on demand
    reward_calibration: tuple | None = None

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, (int, float)) and not v > 0:
                raise ValueError(f"surrogate parameter {f.name} must be positive, got {v}")
        for lo, hi in self.obs_ranges:
            if not hi > lo:
                raise ValueError(f"empty observable range ({lo}, {hi})")
        if self.reward_calibration is not None:
            for lo, hi in self.reward_calibration:
                if not hi > lo:
                    raise ValueError(f"reward calibration requires min < max, got ({lo}, {hi})")

    @property
    def noise_sigmas(self) -> np.ndarray:
        widths = np.array([hi - lo for lo, hi in self.obs_ranges])
        return widths * np.asarray(self.noise_fractions)

    @property
    def friction_mean(self) -> float:
        return self.friction_scale * self.friction_alpha / (self.friction_alpha + self.friction_beta)

    def calibrated(self) -> "SurrogateParams":
        if self.reward_calibration is not None:
            return self
        return replace(self, reward_calibration=calibrate_rewards(self))


@dataclass(frozen=True)
class LatentProcessState:
    friction_mu: float
    cumulative_infeed: float = 0.0
    min_thickness: float = 1.0
    step: int = 0
    last_stretch: float = 0.0


def sample_friction(rng: np.random.Generator, p: SurrogateParams = SurrogateParams()) -> float:
    return p.friction_scale * rng.beta(p.friction_alpha, p.friction_beta)


def simulate_step(s: LatentProcessState, a: int, p: SurrogateParams) -> LatentProcessState:
    if s.step >= HORIZON:
        raise EpisodeExhausted("episode exhausted")
    restraint = s.friction_mu * FORCES[a]
    d_infeed = p.draw_demand * np.exp(-restraint / p.restraint_scale)
    stretch = p.draw_demand - d_infeed
    return LatentProcessState(
        friction_mu=s.friction_mu,
        cumulative_infeed=s.cumulative_infeed + d_infeed,
        min_thickness=s.min_thickness * (1.0 - p.thinning_coeff * stretch),
        step=s.step + 1,
        last_stretch=stretch,
    )


def raw_observation(s: LatentProcessState, last_action: int | None, p: SurrogateParams) -> np.ndarray:
    if last_action is None:
        return np.array([0.0, s.cumulative_infeed, 0.0])
    force = FORCES[last_action]
    return np.array([
        p.force_gain * (force * s.friction_mu + p.stretch_force_coeff * s.last_stretch),
        s.cumulative_infeed,
        force / p.holder_stiffness,
    ])


def observe(s: LatentProcessState, last_action: int | None, p: SurrogateParams,
            rng: np.random.Generator) -> Observation:
    noisy = raw_observation(s, last_action, p) + rng.normal(0.0, 1.0, size=3) * p.noise_sigmas
    return Observation(*(float(v) for v in noisy))


def scale_rewards(neg_infeed, thickness, calibration) -> tuple[np.ndarray, np.ndarray]:
    """Affine map of raw objectives onto [0, 10] with clamping."""
    (lo1, hi1), (lo2, hi2) = calibration
    r1 = np.clip(10.0 * (np.asarray(neg_infeed) - lo1) / (hi1 - lo1), 0.0, 10.0)
    r2 = np.clip(10.0 * (np.asarray(thickness) - lo2) / (hi2 - lo2), 0.0, 10.0)
    return r1, r2


def terminal_reward(s: LatentProcessState, p: SurrogateParams) -> RewardVector:
    if s.step != HORIZON:
        raise ValueError(f"terminal reward requested at step {s.step}")
    r1, r2 = scale_rewards(-s.cumulative_infeed, s.min_thickness, p.calibrated().reward_calibration)
    return RewardVector(float(r1), float(r2))


def all_schedules() -> np.ndarray:
    """All 7**5 action schedules in lexicographic order, shape (16807, 5)."""
    return np.array(list(itertools.product(range(N_ACTIONS), repeat=HORIZON)), dtype=np.int64)


def final_process_state(schedules: np.ndarray, friction: float,
                        p: SurrogateParams) -> tuple[np.ndarray, np.ndarray]:
    """Noise-free (infeed, thickness) after running each schedule at fixed friction."""
    forces = np.asarray(FORCES)
    d_infeed = p.draw_demand * np.exp(-(friction * forces) / p.restraint_scale)
    shrink = 1.0 - p.thinning_coeff * (p.draw_demand - d_infeed)
    schedules = np.atleast_2d(schedules)
    infeed = np.zeros(len(schedules))
    thickness = np.full(len(schedules), p.initial_thickness)
    for k in range(schedules.shape[1]):
        infeed = infeed + d_infeed[schedules[:, k]]
        thickness = thickness * shrink[schedules[:, k]]
    return infeed, thickness


def calibrate_rewards(p: SurrogateParams) -> tuple:
    return _calibrate(replace(p, reward_calibration=None))


@lru_cache(maxsize=16)
def _calibrate(p: SurrogateParams) -> tuple:
    schedules = all_schedules()
    neg_infeed, thickness = [], []
    for mu in CALIBRATION_FRICTIONS:
        infeed, thick = final_process_state(schedules, mu, p)
        neg_infeed.append(-infeed)
        thickness.append(thick)
    neg_infeed = np.concatenate(neg_infeed)
    thickness = np.concatenate(thickness)
    return ((float(neg_infeed.min()), float(neg_infeed.max())),
            (float(thickness.min()), float(thickness.max())))


class DeepDrawEnv:
    """One process execution per episode; all randomness comes from ``rng``."""

    def __init__(self, params: SurrogateParams | None = None, rng: np.random.Generator | None = None):
        self.params = (params or SurrogateParams()).calibrated()
        self.rng = rng if rng is not None else np.random.default_rng()
        self.state: LatentProcessState | None = None

    @property
    def friction(self) -> float:
        return self.state.friction_mu if self.state is not None else float("nan")

    def reset(self) -> Observation:
        mu = sample_friction(self.rng, self.params)
        self.state = LatentProcessState(friction_mu=mu, min_thickness=self.params.initial_thickness)
        return observe(self.state, None, self.params, self.rng)

    def step(self, action: int) -> tuple[Observation, RewardVector, bool]:
        if self.state is None or self.state.step >= HORIZON:
            raise EpisodeExhausted("episode exhausted")
        if not 0 <= action < N_ACTIONS:
            raise ValueError(f"action index out of range: {action}")
        self.state = simulate_step(self.state, action, self.params)
        obs = observe(self.state, action, self.params, self.rng)
        if self.state.step == HORIZON:
            return obs, terminal_reward(self.state, self.params), True
        return obs, ZERO_REWARD, False


def env_reset(rng: np.random.Generator, params: SurrogateParams | None = None) -> tuple[DeepDrawEnv, Observation]:
    env = DeepDrawEnv(params, rng)
    return env, env.reset()

"""Vector-valued neural fitted Q-iteration with objective-weight transfer.

One network per decision step maps (history features, action) to a vector
of expected returns, one component per objective. Policies scalarize that
vector with the current objective weights; the networks themselves are
weight-independent under off-policy targets, which is what lets a sample
memory and trained networks be carried from one weight configuration to
the next.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np

from .env import HORIZON, MAX_FORCE, N_ACTIONS, FORCES, Observation
from .neural import Mlp, MlpArchitecture, TrainConfig, train

FEATURE_DIMS = tuple(3 * (t + 1) + t for t in range(HORIZON))
HIDDEN_LAYERS = ((5,), (10, 10), (50, 50), (50, 50), (50, 50))
REWARD_FLOOR = 1e-6

OFF_POLICY = "off_policy"
ON_POLICY = "on_policy"


# --------------------------------------------------------------------------
# weights and scalarization

@dataclass(frozen=True)
class WeightVector:
    infeed: float
    thickness: float

    def __post_init__(self):
        if not (self.infeed > 0 and self.thickness > 0):
            raise ValueError(f"objective weights must be strictly positive: {self}")

    @property
    def array(self) -> np.ndarray:
        return np.array([self.infeed, self.thickness])

    def scaled(self, c: float) -> "WeightVector":
        return WeightVector(c * self.infeed, c * self.thickness)

    @classmethod
    def draw(cls, rng: np.random.Generator) -> "WeightVector":
        """Protocol draw: thickness weight uniform on 1..9, infeed = 10 - thickness."""
        wt = int(rng.integers(1, 10))
        return cls(float(10 - wt), float(wt))


def _weights(w) -> np.ndarray:
    return w.array if isinstance(w, WeightVector) else np.asarray(w, dtype=float)


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def scalarize_harmonic(r, w):
    """Weighted harmonic mean over the last axis; 0 wherever a component is <= 0."""
    r = np.asarray(r, dtype=float)
    w = _weights(w)
    positive = np.all(r > 0, axis=-1)
    safe = np.where(r > 0, r, 1.0)
    h = w.sum() / np.sum(w / safe, axis=-1)
    return _out(np.where(positive, h, 0.0))


def scalarize_arithmetic(r, w):
    r = np.asarray(r, dtype=float)
    w = _weights(w)
    return _out(np.sum(w * r, axis=-1) / w.sum())


def scalar_value(q, w=None):
    """Identity scalarization for single-output (already scalar) Q-functions."""
    return _out(np.asarray(q, dtype=float)[..., 0])


SCALARIZERS: dict[str, Callable] = {
    "harmonic": scalarize_harmonic,
    "arithmetic": scalarize_arithmetic,
}


def scalarize_reward(r, w, f: Callable = scalarize_harmonic):
    """Scalarize an observed reward; exact zeros are lifted to a tiny positive floor."""
    r = np.asarray(r, dtype=float)
    return f(np.where(r == 0.0, REWARD_FLOOR, r), w)


# --------------------------------------------------------------------------
# state representation

def normalize_observation(obs: Observation, obs_ranges) -> np.ndarray:
    lo = np.array([a for a, _ in obs_ranges])
    hi = np.array([b for _, b in obs_ranges])
    return (np.asarray(obs, dtype=float) - lo) / (hi - lo)


def normalize_action(a) -> np.ndarray:
    return (np.asarray(FORCES)[np.asarray(a)] - FORCES[0]) / (MAX_FORCE - FORCES[0])


def state_features(observations, actions, obs_ranges) -> np.ndarray:
    """History features at step t = len(actions): o_0..o_t then u_0..u_{t-1}."""
    t = len(actions)
    obs = [normalize_observation(o, obs_ranges) for o in observations[:t + 1]]
    return np.concatenate(obs + [normalize_action(np.asarray(actions, dtype=int))])


def q_inputs(features: np.ndarray, actions) -> np.ndarray:
    features = np.atleast_2d(features)
    a = normalize_action(np.asarray(actions, dtype=int)).reshape(-1, 1)
    return np.hstack([features, np.broadcast_to(a, (len(features), 1))])


def q_architectures(output_dim: int = 2) -> list[MlpArchitecture]:
    return [MlpArchitecture(FEATURE_DIMS[t] + 1, HIDDEN_LAYERS[t], output_dim) for t in range(HORIZON)]


# --------------------------------------------------------------------------
# Q-function set

@dataclass
class QNetSet:
    """Per-step networks; ``None`` marks an untrained step that predicts zeros."""
    nets: list = field(default_factory=lambda: [None] * HORIZON)
    output_dim: int = 2
    generation: int = 0

    def trained(self, t: int) -> bool:
        return self.nets[t] is not None

    def values(self, t: int, features, actions) -> np.ndarray:
        X = q_inputs(features, actions)
        if self.nets[t] is None:
            return np.zeros((len(X), self.output_dim))
        return self.nets[t](X)

    def all_action_values(self, t: int, features) -> np.ndarray:
        """Q-vectors for every action: (7, K) for one state, (n, 7, K) for a batch."""
        features = np.asarray(features, dtype=float)
        single = features.ndim == 1
        F = np.atleast_2d(features)
        n = len(F)
        X = q_inputs(np.repeat(F, N_ACTIONS, axis=0), np.tile(np.arange(N_ACTIONS), n))
        if self.nets[t] is None:
            out = np.zeros((n, N_ACTIONS, self.output_dim))
        else:
            out = self.nets[t](X).reshape(n, N_ACTIONS, self.output_dim)
        return out[0] if single else out


# --------------------------------------------------------------------------
# policies

def goal_policy(q: QNetSet, t: int, s: np.ndarray, w, f: Callable = scalarize_harmonic) -> int:
    """Greedy action under scalarized Q-vectors; ties go to the lowest index."""
    return int(np.argmax(f(q.all_action_values(t, s), w)))


def goal_actions(q: QNetSet, t: int, S: np.ndarray, w, f: Callable = scalarize_harmonic) -> np.ndarray:
    return np.argmax(f(q.all_action_values(t, S), w), axis=1)


def explore_policy(goal: int, epsilon: float, rng: np.random.Generator) -> int:
    if rng.random() < epsilon:
        return int(rng.integers(N_ACTIONS))
    return int(goal)


def explore_actions(goal: np.ndarray, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    explore = rng.random(len(goal)) < epsilon
    random_actions = rng.integers(N_ACTIONS, size=len(goal))
    return np.where(explore, random_actions, goal)


def epsilon_schedule(i: int, epsilon0: float = 0.1, lam: float = 1e-3) -> float:
    if i < 0:
        raise ValueError("episode index must be non-negative")
    return epsilon0 * math.exp(-lam * i)


# --------------------------------------------------------------------------
# sample memory

class SampleTuple(NamedTuple):
    t: int
    s: np.ndarray
    a: int
    s_next: np.ndarray | None
    reward: np.ndarray


class SampleMemory:
    """Append-only per-step transition store shared across the tasks of a sequence."""

    def __init__(self, reward_dim: int = 2):
        self.reward_dim = reward_dim
        self._rows = [[] for _ in range(HORIZON)]
        self._cache: dict[int, tuple] = {}

    def add(self, t: int, s, a: int, s_next, reward) -> None:
        reward = np.array(reward, dtype=float).reshape(self.reward_dim)
        terminal = t == HORIZON - 1
        if terminal != (s_next is None):
            raise ValueError("only the last step may (and must) have a terminal successor")
        if not terminal and np.any(reward != 0):
            raise ValueError("non-terminal transitions carry a zero reward")
        s = np.array(s, dtype=float)
        s_next = None if s_next is None else np.array(s_next, dtype=float)
        for arr in (s, s_next, reward):
            if arr is not None:
                arr.flags.writeable = False
        self._rows[t].append(SampleTuple(t, s, int(a), s_next, reward))
        self._cache.pop(t, None)

    def add_episode(self, states, actions, reward) -> None:
        """``states`` are the HORIZON feature vectors visited, ``reward`` the terminal one."""
        zero = np.zeros(self.reward_dim)
        for t in range(HORIZON):
            last = t == HORIZON - 1
            self.add(t, states[t], actions[t], None if last else states[t + 1], reward if last else zero)

    def count(self, t: int) -> int:
        return len(self._rows[t])

    def __len__(self) -> int:
        return sum(self.count(t) for t in range(HORIZON))

    def tuples(self, t: int) -> list[SampleTuple]:
        return list(self._rows[t])

    def arrays(self, t: int):
        """Stacked (S, A, S_next or None, R) for step t."""
        if t not in self._cache:
            rows = self._rows[t]
            S = np.stack([r.s for r in rows])
            A = np.array([r.a for r in rows], dtype=int)
            S_next = None if t == HORIZON - 1 else np.stack([r.s_next for r in rows])
            R = np.stack([r.reward for r in rows])
            self._cache[t] = (S, A, S_next, R)
        return self._cache[t]


# --------------------------------------------------------------------------
# target construction and retraining

@dataclass(frozen=True)
class TaskConfig:
    weights: WeightVector | None = None
    episodes: int = 1000
    retrain_interval: int = 50
    alpha: float = 0.7
    gamma: float = 1.0
    epsilon0: float = 0.1
    lam: float = 1e-3
    update_rule: str = OFF_POLICY

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if not 0 <= self.epsilon0 <= 1:
            raise ValueError("epsilon0 must lie in [0, 1]")
        if self.episodes < 1 or self.retrain_interval < 1:
            raise ValueError("episodes and retrain_interval must be >= 1")
        if self.update_rule not in (OFF_POLICY, ON_POLICY):
            raise ValueError(f"unknown update rule {self.update_rule!r}")


def _blend(memory: SampleMemory, t: int, q_old: QNetSet, bootstrap, task: TaskConfig):
    S, A, _, R = memory.arrays(t)
    old = q_old.values(t, S, A)
    bracket = R if bootstrap is None else R + task.gamma * bootstrap
    # (1 - alpha) * old + alpha * bracket, written so that bracket == old returns old exactly
    return q_inputs(S, A), old + task.alpha * (bracket - old)


def build_targets_off_policy(memory: SampleMemory, t: int, q_old: QNetSet, q_next: QNetSet | None,
                             task: TaskConfig):
    """Inputs and component-wise Q-learning targets for step ``t``.

    ``q_old`` supplies the previous-generation prediction being blended;
    ``q_next`` supplies the step-(t+1) network that is bootstrapped from.
    Each component takes its own max over next actions.
    """
    bootstrap = None
    if t < HORIZON - 1:
        _, _, S_next, _ = memory.arrays(t)
        bootstrap = q_next.all_action_values(t + 1, S_next).max(axis=1)
    return _blend(memory, t, q_old, bootstrap, task)


def build_targets_on_policy(memory: SampleMemory, t: int, q_old: QNetSet, q_next: QNetSet | None,
                            task: TaskConfig, w, epsilon: float, rng: np.random.Generator,
                            f: Callable = scalarize_harmonic):
    """Component-wise SARSA targets with the successor action drawn now.

    One successor action per stored transition is sampled from the
    epsilon-greedy policy under the current weights and shared by all
    components.
    """
    bootstrap = None
    if t < HORIZON - 1:
        _, _, S_next, _ = memory.arrays(t)
        values = q_next.all_action_values(t + 1, S_next)
        goal = np.argmax(f(values, w), axis=1)
        a_next = explore_actions(goal, epsilon, rng)
        bootstrap = values[np.arange(len(a_next)), a_next]
    return _blend(memory, t, q_old, bootstrap, task)


def retrain_all(memory: SampleMemory, prev: QNetSet, task: TaskConfig, w, epsilon: float,
                rng: np.random.Generator, train_cfg: TrainConfig = TrainConfig(),
                f: Callable = scalarize_harmonic, archs=None) -> QNetSet:
    """Retrain every step's network from scratch, last step first."""
    archs = archs or q_architectures(prev.output_dim)
    new = QNetSet([None] * HORIZON, prev.output_dim, prev.generation + 1)
    for t in reversed(range(HORIZON)):
        if memory.count(t) == 0:
            continue
        if task.update_rule == ON_POLICY:
            X, Y = build_targets_on_policy(memory, t, prev, new, task, w, epsilon, rng, f)
        else:
            X, Y = build_targets_off_policy(memory, t, prev, new, task)
        seed = int(rng.integers(2**63))
        new.nets[t] = train(archs[t], X, Y, replace(train_cfg, init_seed=seed))
    return new


# --------------------------------------------------------------------------
# task and sequence execution

@dataclass
class EpisodeLog:
    sequence_id: str
    task_index: int
    episode_index: int
    actions: tuple
    reward_infeed: float
    reward_thickness: float
    scalarized_reward: float
    epsilon: float
    expected_h: tuple
    friction: float
    w_infeed: float
    w_thickness: float

    @property
    def reward(self) -> np.ndarray:
        return np.array([self.reward_infeed, self.reward_thickness])

    @property
    def weights(self) -> WeightVector:
        return WeightVector(self.w_infeed, self.w_thickness)


@dataclass
class TaskResult:
    weights: WeightVector
    logs: list[EpisodeLog]
    retrain_events: int


def _run(env_factory, task: TaskConfig, memory: SampleMemory, qnets: QNetSet, rng: np.random.Generator,
         train_cfg: TrainConfig, f: Callable, stored_reward: Callable, sequence_id: str,
         task_index: int, progress=None):
    w = task.weights
    env_rng, policy_rng, train_rng = rng.spawn(3)
    env = env_factory(env_rng)
    obs_ranges = env.params.obs_ranges
    archs = q_architectures(qnets.output_dim)
    zero_estimate = float(f(np.zeros(qnets.output_dim), w))
    logs = []
    retrains = 0
    for i in range(task.episodes):
        eps = epsilon_schedule(i, task.epsilon0, task.lam)
        observations = [env.reset()]
        actions, states, expected = [], [], []
        terminal = False
        while not terminal:
            t = len(actions)
            s = state_features(observations, actions, obs_ranges)
            if qnets.trained(t):
                scores = f(qnets.all_action_values(t, s), w)
                a = explore_policy(int(np.argmax(scores)), eps, policy_rng)
                expected.append(float(scores[a]))
            else:
                a = int(policy_rng.integers(N_ACTIONS))
                expected.append(zero_estimate)
            obs, reward, terminal = env.step(a)
            states.append(s)
            actions.append(a)
            observations.append(obs)
        memory.add_episode(states, actions, stored_reward(reward))
        logs.append(EpisodeLog(
            sequence_id=sequence_id, task_index=task_index, episode_index=i,
            actions=tuple(actions), reward_infeed=reward.infeed, reward_thickness=reward.thickness,
            scalarized_reward=float(scalarize_reward(reward, w)), epsilon=eps,
            expected_h=tuple(expected), friction=env.friction,
            w_infeed=w.infeed, w_thickness=w.thickness,
        ))
        if (i + 1) % task.retrain_interval == 0:
            eps_next = epsilon_schedule(i + 1, task.epsilon0, task.lam)
            qnets = retrain_all(memory, qnets, task, w, eps_next, train_rng, train_cfg, f, archs)
            retrains += 1
            if progress is not None:
                progress(sequence_id, task_index, i + 1)
    return TaskResult(w, logs, retrains), memory, qnets


def run_task(env_factory, task: TaskConfig, carry: tuple[SampleMemory, QNetSet] | None = None,
             rng: np.random.Generator | None = None, *, train_cfg: TrainConfig = TrainConfig(),
             scalarization: str = "harmonic", sequence_id: str = "", task_index: int = 0,
             progress=None) -> tuple[TaskResult, SampleMemory, QNetSet]:
    """Run one weight configuration, continuing from ``carry`` if given.

    ``env_factory(rng)`` must return an environment exposing ``params``,
    ``friction``, ``reset`` and ``step``. Actions are uniformly random at
    any step whose network has not been trained yet.
    """
    rng = rng if rng is not None else np.random.default_rng()
    if task.weights is None:
        task = replace(task, weights=WeightVector.draw(rng))
    memory, qnets = carry if carry is not None else (SampleMemory(2), QNetSet(output_dim=2))
    return _run(env_factory, task, memory, qnets, rng, train_cfg, SCALARIZERS[scalarization],
                lambda r: np.asarray(r, dtype=float), sequence_id, task_index, progress)


def run_sequence(env_factory, tasks: list[TaskConfig], rng: np.random.Generator, *,
                 train_cfg: TrainConfig = TrainConfig(), scalarization: str = "harmonic",
                 sequence_id: str = "", progress=None) -> list[TaskResult]:
    """Run tasks in order, carrying memory and networks across reconfigurations."""
    if not tasks:
        raise ValueError("a task sequence must not be empty")
    tasks = [task if task.weights is not None else replace(task, weights=WeightVector.draw(rng))
             for task in tasks]
    carry = None
    results = []
    for k, task in enumerate(tasks):
        result, memory, qnets = run_task(env_factory, task, carry, rng, train_cfg=train_cfg,
                                         scalarization=scalarization, sequence_id=sequence_id,
                                         task_index=k, progress=progress)
        carry = (memory, qnets)
        results.append(result)
    return results


def run_baseline_task(env_factory, task: TaskConfig, rng: np.random.Generator | None = None, *,
                      train_cfg: TrainConfig = TrainConfig(), sequence_id: str = "",
                      task_index: int = 0, progress=None) -> TaskResult:
    """Single-policy baseline: scalar Q-learning on the weighted arithmetic mean reward.

    Logged ``scalarized_reward`` is still the harmonic mean of the reward
    vector, so baseline and transfer runs are scored identically.
    """
    rng = rng if rng is not None else np.random.default_rng()
    if task.weights is None:
        task = replace(task, weights=WeightVector.draw(rng))
    task = replace(task, update_rule=OFF_POLICY)
    w = task.weights
    result, _, _ = _run(env_factory, task, SampleMemory(1), QNetSet(output_dim=1), rng, train_cfg,
                        scalar_value, lambda r: [scalarize_arithmetic(np.asarray(r, dtype=float), w)],
                        sequence_id, task_index, progress)
    return result

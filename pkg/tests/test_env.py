import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from morl_nfq.deepdraw import (
    CALIBRATION_FRICTIONS,
    DeepDrawEnv,
    LatentProcessState,
    SurrogateParams,
    all_schedules,
    calibrate_rewards,
    env_reset,
    final_process_state,
    raw_observation,
    sample_friction,
    scale_rewards,
    simulate_step,
    terminal_reward,
)
from morl_nfq.env import FORCES, HORIZON, EpisodeExhausted, action_force, force_action, rollout

P = SurrogateParams().calibrated()


def run_schedule(schedule, mu, p=P):
    s = LatentProcessState(friction_mu=mu, min_thickness=p.initial_thickness)
    for a in schedule:
        s = simulate_step(s, a, p)
    return s


# ---------------------------------------------------------------- env-core

def test_actions_map_to_forces():
    assert [action_force(i) for i in range(7)] == [20, 40, 60, 80, 100, 120, 140]
    assert all(force_action(action_force(i)) == i for i in range(7))
    with pytest.raises(ValueError):
        action_force(7)
    with pytest.raises(ValueError):
        force_action(30.0)


def test_reset_is_deterministic_in_the_stream():
    _, o1 = env_reset(np.random.default_rng(11))
    _, o2 = env_reset(np.random.default_rng(11))
    assert o1 == o2


def test_reset_observation_is_pure_noise():
    rng = np.random.default_rng(5)
    _, obs = env_reset(rng)
    # replay the same stream: friction draw, then the three noise draws
    replay = np.random.default_rng(5)
    sample_friction(replay, P)
    noise = replay.normal(0.0, 1.0, size=3) * P.noise_sigmas
    np.testing.assert_array_equal(np.array(obs), noise)
    assert raw_observation(LatentProcessState(0.03), None, P).tolist() == [0.0, 0.0, 0.0]


def test_reward_only_at_the_terminal_step():
    env, _ = env_reset(np.random.default_rng(3))
    for k in range(HORIZON - 1):
        _, r, done = env.step(k % 7)
        assert tuple(r) == (0.0, 0.0) and not done
    _, r, done = env.step(6)
    assert done
    assert 0.0 <= r.infeed <= 10.0 and 0.0 <= r.thickness <= 10.0
    with pytest.raises(EpisodeExhausted, match="episode exhausted"):
        env.step(0)


def test_trajectory_is_a_function_of_seed_and_actions():
    schedule = [3, 1, 4, 1, 5]

    def play(seed):
        env = DeepDrawEnv(P, np.random.default_rng(seed))
        return rollout(env, lambda t, obs, acts: schedule[t])

    a, b = play(99), play(99)
    assert a.observations == b.observations and a.reward == b.reward
    assert len(a.actions) == 5 and len(a.observations) == 6 and a.complete
    assert a.friction_used == b.friction_used


def test_friction_sample_mean_matches_scaled_beta():
    rng = np.random.default_rng(2024)
    draws = np.array([sample_friction(rng, P) for _ in range(100_000)])
    closed_mean = 0.2 * 3 / 18
    closed_var = 0.2**2 * 3 * 15 / (18**2 * 19)
    assert abs(draws.mean() - closed_mean) < 0.002
    assert 0.0323 <= draws.mean() <= 0.0343
    assert draws.var() == pytest.approx(closed_var, rel=0.03)
    assert P.friction_mean == pytest.approx(closed_mean)


def test_friction_mode_of_scaled_beta():
    assert 0.2 * (3 - 1) / (3 + 15 - 2) == pytest.approx(0.025)


# ---------------------------------------------------------------- surrogate dynamics

def test_zero_friction_draws_full_demand_without_thinning():
    s = simulate_step(LatentProcessState(friction_mu=0.0), 6, P)
    assert s.cumulative_infeed == P.draw_demand
    assert s.last_stretch == 0.0 and s.min_thickness == 1.0


def test_step_at_high_force_matches_formula():
    s = simulate_step(LatentProcessState(friction_mu=0.025), 6, P)
    expected = 1.0 * math.exp(-(0.025 * 140.0) / 1.5)
    assert s.cumulative_infeed == pytest.approx(expected, rel=1e-12)
    assert s.cumulative_infeed == pytest.approx(0.0970, abs=5e-5)
    assert s.min_thickness == pytest.approx(1.0 - 0.08 * (1.0 - expected), rel=1e-12)


@pytest.mark.parametrize("mu", [0.01, 0.025, 0.05])
def test_more_force_means_less_infeed_and_thinner_wall(mu):
    states = [simulate_step(LatentProcessState(mu), a, P) for a in range(7)]
    infeed = [s.cumulative_infeed for s in states]
    thick = [s.min_thickness for s in states]
    assert all(x > y for x, y in zip(infeed, infeed[1:]))
    assert all(x > y for x, y in zip(thick, thick[1:]))


def test_stepping_past_the_horizon_fails():
    s = run_schedule([0] * 5, 0.03)
    with pytest.raises(EpisodeExhausted):
        simulate_step(s, 0, P)


def test_latent_state_monotone_within_episode():
    s = LatentProcessState(0.04)
    for a in [6, 0, 3, 6, 2]:
        nxt = simulate_step(s, a, P)
        assert nxt.min_thickness <= s.min_thickness
        assert nxt.cumulative_infeed >= s.cumulative_infeed
        assert nxt.friction_mu == s.friction_mu
        s = nxt


# ---------------------------------------------------------------- observation noise

def test_noise_sigmas_follow_value_ranges():
    sig = SurrogateParams().noise_sigmas
    assert sig[0] == pytest.approx(0.005 * 140.0)
    assert sig[1] == pytest.approx(0.025)
    assert sig[2] == pytest.approx(0.00035)


def test_empirical_noise_sigma_within_ten_percent():
    env = DeepDrawEnv(P, np.random.default_rng(8))
    samples = np.array([env.reset() for _ in range(10_000)])
    # step-0 raw values are all zero, so the samples are pure noise
    np.testing.assert_allclose(samples.std(axis=0), P.noise_sigmas, rtol=0.10)


# ---------------------------------------------------------------- rewards and calibration

def test_reward_map_endpoints():
    (lo1, hi1), (lo2, hi2) = P.reward_calibration
    r1, r2 = scale_rewards(np.array([lo1, hi1]), np.array([lo2, hi2]), P.reward_calibration)
    assert r1.tolist() == [0.0, 10.0] and r2.tolist() == [0.0, 10.0]
    r1, r2 = scale_rewards(lo1 - 1.0, hi2 + 1.0, P.reward_calibration)
    assert (float(r1), float(r2)) == (0.0, 10.0)


def test_terminal_reward_requires_a_finished_episode():
    with pytest.raises(ValueError):
        terminal_reward(LatentProcessState(0.03, step=3), P)


@pytest.mark.parametrize("mu", CALIBRATION_FRICTIONS)
def test_constant_schedule_extremes(mu):
    rewards = [terminal_reward(run_schedule([a] * 5, mu), P) for a in range(7)]
    thickness = [r.thickness for r in rewards]
    infeed = [r.infeed for r in rewards]
    assert max(range(7), key=thickness.__getitem__) == 0
    assert max(range(7), key=infeed.__getitem__) == 6
    # the two extremes are mutually non-dominated among constant schedules
    for k in (0, 6):
        assert not any(
            infeed[j] >= infeed[k] and thickness[j] >= thickness[k]
            and (infeed[j] > infeed[k] or thickness[j] > thickness[k])
            for j in range(7)
        )


def test_calibration_is_ordered_and_idempotent():
    a = calibrate_rewards(SurrogateParams())
    b = calibrate_rewards(SurrogateParams(draw_demand=1.0))
    assert a == b
    for lo, hi in a:
        assert lo < hi


def test_calibrated_grid_spans_zero_to_ten():
    schedules = all_schedules()
    r1_all, r2_all = [], []
    for mu in CALIBRATION_FRICTIONS:
        infeed, thick = final_process_state(schedules, mu, P)
        r1, r2 = scale_rewards(-infeed, thick, P.reward_calibration)
        r1_all.append(r1)
        r2_all.append(r2)
    r1, r2 = np.concatenate(r1_all), np.concatenate(r2_all)
    assert r1.min() == 0.0 and r1.max() == 10.0
    assert r2.min() == 0.0 and r2.max() == 10.0


def test_vectorised_and_stepwise_dynamics_agree():
    schedules = all_schedules()[::97]
    infeed, thick = final_process_state(schedules, 0.028, P)
    for s, i, t in zip(schedules, infeed, thick):
        end = run_schedule(s, 0.028)
        assert end.cumulative_infeed == pytest.approx(i, rel=1e-12)
        assert end.min_thickness == pytest.approx(t, rel=1e-12)


def test_invalid_params_rejected():
    with pytest.raises(ValueError):
        SurrogateParams(restraint_scale=0.0)
    with pytest.raises(ValueError):
        SurrogateParams(reward_calibration=((1.0, 0.0), (0.0, 1.0)))


schedule_st = st.lists(st.integers(0, 6), min_size=5, max_size=5)


@settings(max_examples=200, deadline=None)
@given(schedule_st, schedule_st, st.sampled_from(CALIBRATION_FRICTIONS))
def test_componentwise_larger_schedule_is_thinner_and_draws_less(u, v, mu):
    lo = [min(a, b) for a, b in zip(u, v)]
    hi = [max(a, b) for a, b in zip(u, v)]
    s_lo, s_hi = run_schedule(lo, mu), run_schedule(hi, mu)
    assert s_lo.min_thickness >= s_hi.min_thickness
    assert s_lo.cumulative_infeed >= s_hi.cumulative_infeed


@settings(max_examples=50, deadline=None)
@given(schedule_st, st.integers(0, 2**32 - 1))
def test_reward_sparsity(schedule, seed):
    env = DeepDrawEnv(P, np.random.default_rng(seed))
    env.reset()
    total = np.zeros(2)
    for a in schedule[:-1]:
        _, r, done = env.step(a)
        total += r
        assert not done
    assert total.tolist() == [0.0, 0.0]
    _, r, done = env.step(schedule[-1])
    assert done and all(0.0 <= v <= 10.0 for v in r)


def test_forces_constant():
    assert FORCES == (20.0, 40.0, 60.0, 80.0, 100.0, 120.0, 140.0)

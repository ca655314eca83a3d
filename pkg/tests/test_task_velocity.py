import numpy as np
import pytest

from stridesim.env import ManagerBasedRlEnv
from stridesim.tasks import make_env_cfg
from stridesim.tasks.velocity import NOMINAL_BASE_HEIGHT

from test_managers import quiet_cfg


def term_value(env, name):
    return env.reward_manager.last_values[name]


def still_env(n=2):
    env = ManagerBasedRlEnv(quiet_cfg(n))
    env.reset()
    return env


def evaluate_terms(env):
    env.reward_manager.compute(env.dt_control)
    return env.reward_manager.last_values


def test_registered_task_ids():
    for task in ("Velocity-Flat", "Velocity-Rough"):
        cfg = make_env_cfg(task, num_envs=2)
        env = ManagerBasedRlEnv(cfg, task)
        obs = env.reset()
        assert "policy" in obs and "critic" in obs


def test_rough_critic_includes_height_scan():
    flat = make_env_cfg("Velocity-Flat")
    rough = make_env_cfg("Velocity-Rough")
    assert "height_scan" not in flat.observations["critic"].terms
    assert "height_scan" in rough.observations["critic"].terms


def test_track_term_is_one_at_exact_tracking():
    env = still_env()
    env.command_manager.command[:, 0] = 0.7
    env.state.qd[:, 0] = 0.7
    env.state.q[:, 2] = 0.0
    env.entity_data.refresh(env.model, env.state)
    values = evaluate_terms(env)
    assert np.allclose(values["track_vx_exp"], 1.0)


def test_track_term_in_unit_interval():
    env = still_env()
    env.command_manager.command[:, 0] = 1.0
    env.state.qd[:, 0] = -1.0
    env.entity_data.refresh(env.model, env.state)
    values = evaluate_terms(env)
    assert np.all(values["track_vx_exp"] > 0.0)
    assert np.all(values["track_vx_exp"] < 1.0)


def test_all_penalties_zero_at_rest_default_pose():
    env = still_env()
    env.state.qd[...] = 0.0
    env.state.contact.foot_vel[...] = 0.0
    env.entity_data.refresh(env.model, env.state)
    values = evaluate_terms(env)
    for name in (
        "pitch_rate_penalty",
        "angular_momentum_penalty",
        "action_rate_penalty",
        "joint_limit_penalty",
        "foot_slip_penalty",
    ):
        assert np.all(values[name] == 0.0), name


def test_pitch_rate_and_momentum_penalties_quadratic():
    env = still_env()
    env.state.qd[:, 2] = 2.0
    env.entity_data.refresh(env.model, env.state)
    values = evaluate_terms(env)
    assert np.allclose(values["pitch_rate_penalty"], 4.0)
    assert np.allclose(values["angular_momentum_penalty"], (0.15 * 2.0) ** 2)


def test_action_rate_penalty_squared_difference():
    env = still_env()
    env.action_manager.process(np.full((2, 4), 0.3))
    env.action_manager.process(np.full((2, 4), 0.5))
    values = evaluate_terms(env)
    assert np.allclose(values["action_rate_penalty"], 4 * 0.2**2)


def test_joint_limit_penalty_measures_soft_excess():
    env = still_env()
    # hip limits (-1.6, 1.6), soft fraction 0.9 -> soft half range 1.44
    env.state.q[:, 3] = 1.54
    env.entity_data.refresh(env.model, env.state)
    values = evaluate_terms(env)
    assert np.allclose(values["joint_limit_penalty"], 0.1, atol=1e-12)


def test_foot_slip_penalty_scripted_slide():
    env = still_env()
    env.state.contact.in_contact[:, :] = True
    env.state.contact.foot_vel[:, :, 0] = 0.5
    env.entity_data.refresh(env.model, env.state)
    values = evaluate_terms(env)
    assert np.allclose(values["foot_slip_penalty"], 1.0)  # 0.5 per foot, 2 feet


def test_feet_air_time_rewards_target_landings():
    env = still_env()
    sensor = env.contact_sensor
    sensor.last_air_time[:, 0] = 0.5
    sensor.last_touchdown_step[:, 0] = env.state.sim_step  # landed this step
    sensor.last_touchdown_step[:, 1] = -100  # stale landing: no contribution
    values = evaluate_terms(env)
    assert np.allclose(values["feet_air_time"], 0.5 - 0.3)


def test_termination_thresholds():
    env = still_env(3)
    env.state.q[0, 1] = 0.1  # below 0.3 * nominal
    env.state.q[1, 2] = 1.5  # pitched past 1 rad
    tm = env.termination_manager
    terminated, truncated = tm.compute()
    assert terminated.tolist() == [True, True, False]
    assert not truncated.any()
    assert 0.3 * NOMINAL_BASE_HEIGHT == pytest.approx(
        env.cfg.terminations["base_height_below"].params["min_height"], abs=1e-4
    )


def test_default_standing_pose_not_terminated():
    env = still_env()
    terminated, truncated = env.termination_manager.compute()
    assert not terminated.any() and not truncated.any()


def test_commanded_twist_has_two_channels_with_zero_second_range():
    cfg = make_env_cfg("Velocity-Flat")
    assert list(cfg.commands.ranges) == ["vx", "pitch_rate"]
    assert cfg.commands.ranges["pitch_rate"] == (0.0, 0.0)


def scripted_reward(env, writer):
    """Apply a state writer, refresh, and return the summed weighted reward."""
    writer(env)
    env.entity_data.refresh(env.model, env.state)
    total = env.reward_manager.compute(env.dt_control)
    return total


def test_perfect_tracker_beats_scripted_baselines():
    cfg = quiet_cfg(1)
    env = ManagerBasedRlEnv(cfg)
    env.reset()
    env.command_manager.command[:, 0] = 0.8

    def perfect(env):
        # follows the command exactly, zero pitch motion, feet landing with
        # the target air time
        env.state.qd[...] = 0.0
        env.state.qd[:, 0] = 0.8
        env.state.q[:, 2] = 0.0
        env.state.q[:, 3:] = env.default_joint_pos
        env.state.contact.in_contact[...] = False
        env.state.contact.foot_vel[...] = 0.0
        env.contact_sensor.last_air_time[:, 0] = 0.3
        env.contact_sensor.last_touchdown_step[:, 0] = env.state.sim_step

    def stationary(env):
        env.state.qd[...] = 0.0
        env.state.q[:, 3:] = env.default_joint_pos
        env.contact_sensor.last_touchdown_step[...] = -100

    def slider(env):
        # drags its feet: tracks the command but slides both contacts
        env.state.qd[...] = 0.0
        env.state.qd[:, 0] = 0.8
        env.state.contact.in_contact[...] = True
        env.state.contact.foot_vel[:, :, 0] = 0.8
        env.contact_sensor.last_touchdown_step[...] = -100

    def flailer(env):
        env.state.qd[...] = 0.0
        env.state.qd[:, 0] = 0.8
        env.state.qd[:, 2] = 3.0
        env.contact_sensor.last_touchdown_step[...] = -100

    scores = {}
    for name, writer in (
        ("perfect", perfect),
        ("stationary", stationary),
        ("slider", slider),
        ("flailer", flailer),
    ):
        scores[name] = float(scripted_reward(env, writer)[0])
    assert scores["perfect"] == max(scores.values())
    assert scores["perfect"] > scores["slider"] > scores["flailer"]
    assert scores["perfect"] > scores["stationary"]

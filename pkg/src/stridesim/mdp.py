"""Built-in MDP term functions, registered by id for the manager configs.

Every function here is pure over (environment state, params, RNG stream):
observation and reward terms return per-world arrays; termination terms
return boolean masks; event and curriculum terms receive the world ids they
act on. New terms register the same way from user code.
"""

from __future__ import annotations

import numpy as np

from .managers.base import (
    curriculum_term,
    event_term,
    observation_term,
    reward_term,
    termination_term,
)
from .managers.event import randomize_field

# ---------------------------------------------------------------------------
# observation terms


@observation_term("base_lin_vel")
def base_lin_vel(env) -> np.ndarray:
    """Base-frame linear velocity (N, 2)."""
    return env.entity_data.root_lin_vel_b


@observation_term("base_ang_vel")
def base_ang_vel(env) -> np.ndarray:
    """Pitch rate (N, 1)."""
    return env.entity_data.root_ang_vel[:, None]


@observation_term("base_lin_acc")
def base_lin_acc(env) -> np.ndarray:
    """Finite-difference base-frame acceleration (N, 2), the planar IMU."""
    return (env.entity_data.root_lin_vel_b - env.prev_lin_vel_b) / env.dt_control


@observation_term("projected_gravity")
def projected_gravity(env) -> np.ndarray:
    return env.entity_data.projected_gravity


@observation_term("joint_pos_rel")
def joint_pos_rel(env) -> np.ndarray:
    """Joint positions relative to the default pose (N, k)."""
    return env.entity_data.joint_pos - env.default_joint_pos


@observation_term("joint_vel")
def joint_vel(env) -> np.ndarray:
    return env.entity_data.joint_vel


@observation_term("last_action")
def last_action(env) -> np.ndarray:
    return env.action_manager.action


@observation_term("command")
def command(env) -> np.ndarray:
    return env.command_manager.command


@observation_term("base_height")
def obs_base_height(env) -> np.ndarray:
    return env.state.q[:, 1:2]


@observation_term("sim_time")
def sim_time(env) -> np.ndarray:
    return env.state.time[:, None]


@observation_term("height_scan")
def height_scan(env) -> np.ndarray:
    """Relative terrain heights from the ray scanner (N, P)."""
    return env.ray_scanner.read(env.terrain, env.entity_data, env.state)


@observation_term("foot_contact_forces")
def foot_contact_forces(env) -> np.ndarray:
    n = env.num_envs
    return env.entity_data.foot_forces.reshape(n, -1)


# ---------------------------------------------------------------------------
# reward terms


@reward_term("constant")
def constant(env, value: float = 1.0) -> np.ndarray:
    return np.full(env.num_envs, value)


@reward_term("base_height")
def rew_base_height(env) -> np.ndarray:
    """Sentinel/shaping term: the base height itself."""
    return env.state.q[:, 1].copy()


@reward_term("track_vx_exp")
def track_vx_exp(env, std: float = 0.25) -> np.ndarray:
    """exp(-(vx_cmd - vx)^2 / std^2) against base-frame forward velocity."""
    vx_cmd = env.command_manager.command[:, 0]
    vx = env.entity_data.root_lin_vel_b[:, 0]
    err = vx_cmd - vx
    return np.exp(-(err * err) / (std * std))


@reward_term("pitch_rate_penalty")
def pitch_rate_penalty(env) -> np.ndarray:
    rate = env.entity_data.root_ang_vel
    return rate * rate


@reward_term("angular_momentum_penalty")
def angular_momentum_penalty(env) -> np.ndarray:
    """Planar surrogate: squared base angular momentum (I_b * pitch_rate)^2."""
    inertia = np.broadcast_to(env.model.field("base_inertia").value, (env.num_envs,))
    momentum = inertia * env.entity_data.root_ang_vel
    return momentum * momentum


@reward_term("action_rate_penalty")
def action_rate_penalty(env) -> np.ndarray:
    am = env.action_manager
    delta = am.action - am.prev_action
    return (delta * delta).sum(axis=1)


@reward_term("joint_limit_penalty")
def joint_limit_penalty(env) -> np.ndarray:
    """Distance beyond the soft fraction of each joint's position range."""
    q = env.entity_data.joint_pos
    limits = env.model.pos_limits
    mid = 0.5 * (limits[:, 0] + limits[:, 1])
    soft_half = 0.5 * (limits[:, 1] - limits[:, 0]) * env.model.soft_limit_fraction
    excess = np.maximum(0.0, np.abs(q - mid) - soft_half)
    return excess.sum(axis=1)


@reward_term("foot_slip_penalty")
def foot_slip_penalty(env) -> np.ndarray:
    """Sum of |horizontal foot speed| over feet in contact."""
    slip = np.abs(env.entity_data.foot_vel[:, :, 0]) * env.entity_data.foot_in_contact
    return slip.sum(axis=1)


@reward_term("feet_air_time")
def feet_air_time(env, target_air_time: float = 0.3) -> np.ndarray:
    """(last air time - target) per foot that touched down this control step."""
    sensor = env.contact_sensor
    landed = sensor.touched_down_within(env.state.sim_step, env.decimation)
    return ((sensor.last_air_time - target_air_time) * landed).sum(axis=1)


# ---------------------------------------------------------------------------
# termination terms


@termination_term("base_height_below")
def base_height_below(env, min_height: float = 0.15) -> np.ndarray:
    return env.state.q[:, 1] < min_height


@termination_term("pitch_beyond")
def pitch_beyond(env, max_pitch: float = 1.0) -> np.ndarray:
    return np.abs(env.state.q[:, 2]) > max_pitch


@termination_term("time_out")
def time_out(env) -> np.ndarray:
    return env.episode_steps >= env.max_episode_steps


# ---------------------------------------------------------------------------
# event terms


@event_term("randomize_model_field")
def randomize_model_field(
    env,
    ids: np.ndarray,
    field: str = "friction",
    distribution: str = "uniform",
    rng_range: tuple[float, float] = (0.8, 1.2),
    operation: str = "scale",
) -> None:
    randomize_field(
        env.model, env.streams, field, distribution, tuple(rng_range), operation,
        np.asarray(ids), f"event.randomize.{field}",
    )


@event_term("push_base")
def push_base(
    env,
    ids: np.ndarray,
    fx_range: tuple[float, float] = (-50.0, 50.0),
    fz_range: tuple[float, float] = (0.0, 0.0),
) -> None:
    """World-frame impulse force on the base, consumed by the next substep."""
    ids = np.asarray(ids)
    env.state.ext_force[ids, 0] += env.streams.uniform("event.push.fx", *fx_range, ids, 1)[:, 0]
    env.state.ext_force[ids, 1] += env.streams.uniform("event.push.fz", *fz_range, ids, 1)[:, 0]


@event_term("reset_joints_jitter")
def reset_joints_jitter(
    env, ids: np.ndarray, pos_range: tuple[float, float] = (-0.1, 0.1)
) -> None:
    ids = np.asarray(ids)
    k = env.model.num_joints
    env.state.q[ids, 3:] += env.streams.uniform("event.joint_jitter", *pos_range, ids, k)


# ---------------------------------------------------------------------------
# curriculum terms


@curriculum_term("terrain_levels")
def terrain_levels(
    env, ids: np.ndarray, promote_ratio: float = 0.8, demote_ratio: float = 0.4
) -> None:
    """Move resetting worlds across difficulty rows by distance walked."""
    ids = np.asarray(ids)
    if not ids.size or env.terrain is None:
        return
    walked = np.abs(env.state.q[ids, 0] - env.episode_start_x[ids])
    commanded = env.commanded_distance[ids]
    rows = env.terrain_rows[ids]
    rows = np.where(walked >= promote_ratio * commanded, rows + 1, rows)
    rows = np.where(walked <= demote_ratio * commanded, rows - 1, rows)
    env.terrain_rows[ids] = np.clip(rows, 0, env.terrain.rows - 1)


@curriculum_term("command_widen")
def command_widen(
    env,
    ids: np.ndarray,
    term: str = "track_vx_exp",
    threshold: float = 0.8,
    factor: float = 1.2,
) -> None:
    """Widen a world's command ranges when its mean tracking reward is high."""
    ids = np.asarray(ids)
    if not ids.size:
        return
    steps = env.episode_steps[ids].astype(np.float64)
    mean = env.reward_manager.mean_raw(term, ids, steps)
    good = ids[mean > threshold]
    if good.size:
        env.command_manager.widen(good, factor)


@curriculum_term("reward_weight_schedule")
def reward_weight_schedule(
    env,
    ids: np.ndarray,
    term: str = "",
    start_weight: float = 1.0,
    end_weight: float = 0.0,
    start_step: int = 0,
    end_step: int = 1000,
) -> None:
    """Linear interpolation of a reward term's weight over global steps."""
    span = max(1, end_step - start_step)
    frac = np.clip((env.global_step - start_step) / span, 0.0, 1.0)
    env.reward_manager.weights[term] = start_weight + frac * (end_weight - start_weight)

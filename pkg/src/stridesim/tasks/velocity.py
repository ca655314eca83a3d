"""Velocity-tracking task for the planar biped, flat and rough variants.

The config builders return fully populated EnvCfg instances; creating a
variant is copy-and-mutate, and every field is reachable from the CLI. The
weights here are engineering defaults chosen so a zero policy stands still
and a tracking policy is rewarded for clean, non-sliding gaits.
"""

from __future__ import annotations

import numpy as np

from ..actuators import IdealPdCfg
from ..env import EnvCfg, InitStateCfg, SceneCfg
from ..managers import (
    ActionTermCfg,
    CommandCfg,
    CurriculumTermCfg,
    EventTermCfg,
    NoiseCfg,
    ObsGroupCfg,
    ObsTermCfg,
    RewardTermCfg,
    TerminationTermCfg,
)
from ..sensors import RayScanCfg
from ..sim.spec import JointSpec, ModelSpec
from ..terrain import (
    FlatCfg,
    PyramidStairsCfg,
    RandomGridCfg,
    SlopeCfg,
    TerrainGridCfg,
    UniformNoiseCfg,
    WaveCfg,
)

DEFAULT_JOINT_POS = (0.3, -0.6, 0.3, -0.6)
NOMINAL_BASE_HEIGHT = float(0.25 * np.cos(0.3) + 0.25 * np.cos(0.3 - 0.6))


def biped_spec() -> ModelSpec:
    """Two hip-knee legs hanging from a planar floating base."""
    joints = []
    for side, hip_x in (("l", -0.1), ("r", 0.1)):
        hip_idx = len(joints)
        joints.append(
            JointSpec(
                name=f"{side}_hip",
                parent=-1,
                attach_offset=(hip_x, 0.0),
                link_length=0.25,
                link_mass=0.5,
                rotor_inertia=0.1,
                damping=0.1,
                pos_limits=(-1.6, 1.6),
            )
        )
        joints.append(
            JointSpec(
                name=f"{side}_knee",
                parent=hip_idx,
                attach_offset=(0.0, -0.25),
                link_length=0.25,
                link_mass=0.5,
                rotor_inertia=0.1,
                damping=0.1,
                pos_limits=(-2.2, 0.4),
            )
        )
    return ModelSpec(
        name="biped",
        base_mass=8.0,
        base_inertia=0.15,
        joints=joints,
        feet=[1, 3],
        contact_stiffness=2.0e4,
        contact_damping=600.0,
        tangential_gain=50.0,
        friction=1.0,
        physics_dt=0.005,
        decimation=4,
    )


def _observation_groups(rough: bool) -> dict[str, ObsGroupCfg]:
    policy_terms = {
        "base_lin_vel": ObsTermCfg(func="base_lin_vel", noise=NoiseCfg("uniform", 0.05)),
        "base_ang_vel": ObsTermCfg(func="base_ang_vel", noise=NoiseCfg("uniform", 0.05)),
        "projected_gravity": ObsTermCfg(
            func="projected_gravity", noise=NoiseCfg("uniform", 0.02)
        ),
        "joint_pos_rel": ObsTermCfg(func="joint_pos_rel", noise=NoiseCfg("uniform", 0.01)),
        "joint_vel": ObsTermCfg(func="joint_vel", noise=NoiseCfg("uniform", 0.1)),
        "last_action": ObsTermCfg(func="last_action"),
        "command": ObsTermCfg(func="command"),
    }
    critic_terms = {
        name: ObsTermCfg(func=cfg.func, params=dict(cfg.params))
        for name, cfg in policy_terms.items()
    }
    critic_terms["foot_contact_forces"] = ObsTermCfg(func="foot_contact_forces", scale=0.01)
    if rough:
        critic_terms["height_scan"] = ObsTermCfg(func="height_scan", clip=(-2.0, 2.0))
    return {
        "policy": ObsGroupCfg(terms=policy_terms, enable_noise=True),
        "critic": ObsGroupCfg(terms=critic_terms, enable_noise=False),
    }


def _rewards() -> dict[str, RewardTermCfg]:
    return {
        "track_vx_exp": RewardTermCfg(func="track_vx_exp", weight=1.0, params={"std": 0.25}),
        "pitch_rate_penalty": RewardTermCfg(func="pitch_rate_penalty", weight=-0.05),
        "angular_momentum_penalty": RewardTermCfg(func="angular_momentum_penalty", weight=-0.02),
        "action_rate_penalty": RewardTermCfg(func="action_rate_penalty", weight=-0.01),
        "joint_limit_penalty": RewardTermCfg(func="joint_limit_penalty", weight=-1.0),
        "foot_slip_penalty": RewardTermCfg(func="foot_slip_penalty", weight=-0.1),
        "feet_air_time": RewardTermCfg(
            func="feet_air_time", weight=1.0, params={"target_air_time": 0.3}
        ),
    }


def _terminations() -> dict[str, TerminationTermCfg]:
    return {
        "base_height_below": TerminationTermCfg(
            func="base_height_below", params={"min_height": round(0.3 * NOMINAL_BASE_HEIGHT, 4)}
        ),
        "pitch_beyond": TerminationTermCfg(func="pitch_beyond", params={"max_pitch": 1.0}),
        "time_out": TerminationTermCfg(func="time_out", time_out=True),
    }


def _events() -> dict[str, EventTermCfg]:
    return {
        "startup_mass_scale": EventTermCfg(
            func="randomize_model_field",
            mode="startup",
            params={
                "field": "base_mass",
                "distribution": "uniform",
                "rng_range": (0.8, 1.2),
                "operation": "scale",
            },
        ),
        "reset_joint_jitter": EventTermCfg(
            func="reset_joints_jitter", mode="reset", params={"pos_range": (-0.1, 0.1)}
        ),
        "interval_push": EventTermCfg(
            func="push_base",
            mode="interval",
            interval_range=(10.0, 15.0),
            params={"fx_range": (-40.0, 40.0), "fz_range": (0.0, 0.0)},
        ),
    }


def _flat_terrain() -> TerrainGridCfg:
    return TerrainGridCfg(rows=1, cols=1, patch_length=8.0, sub_terrains=[FlatCfg()])


def _rough_terrain() -> TerrainGridCfg:
    return TerrainGridCfg(
        rows=5,
        cols=6,
        patch_length=8.0,
        mode="curriculum",
        sub_terrains=[
            FlatCfg(proportion=0.5),
            PyramidStairsCfg(step_height_range=(0.02, 0.1), proportion=1.0),
            RandomGridCfg(height_range=(0.01, 0.06), proportion=1.0),
            SlopeCfg(max_slope=0.3, proportion=1.0),
            UniformNoiseCfg(amplitude_range=(0.005, 0.04), proportion=1.0),
            WaveCfg(amplitude_range=(0.01, 0.06), proportion=1.0),
        ],
    )


def velocity_env_cfg(rough: bool = False, num_envs: int = 16, seed: int = 0) -> EnvCfg:
    spec = biped_spec()
    curriculum: dict[str, CurriculumTermCfg] = {
        "command_widen": CurriculumTermCfg(
            func="command_widen",
            params={"term": "track_vx_exp", "threshold": 0.9, "factor": 1.1},
        )
    }
    if rough:
        curriculum["terrain_levels"] = CurriculumTermCfg(
            func="terrain_levels", params={"promote_ratio": 0.8, "demote_ratio": 0.4}
        )
    return EnvCfg(
        scene=SceneCfg(
            model=spec,
            terrain=_rough_terrain() if rough else _flat_terrain(),
            num_envs=num_envs,
            init_state=InitStateCfg(
                base_pose=(0.0, 0.48, 0.0),
                joint_pos=DEFAULT_JOINT_POS,
            ),
            ray_scan=RayScanCfg(offsets=(-0.4, -0.2, 0.0, 0.2, 0.4)),
        ),
        episode_length_s=20.0,
        actions={
            "joint_targets": ActionTermCfg(
                joint_patterns=[".*"],
                actuators={"legs": IdealPdCfg(kp=40.0, kd=2.0, effort_limit=30.0)},
                scale=0.5,
                clip=(-2.0, 2.0),
            )
        },
        observations=_observation_groups(rough),
        rewards=_rewards(),
        terminations=_terminations(),
        events=_events(),
        commands=CommandCfg(
            ranges={"vx": (-1.0, 1.0), "pitch_rate": (0.0, 0.0)},
            resample_period=10.0,
            cap_scale=2.0,
        ),
        curriculum=curriculum,
        capture_len=200,
        seed=seed,
    )

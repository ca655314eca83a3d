"""ManagerBasedRlEnv: the reset/step state machine over N batched worlds.

Each control step runs a fixed pipeline: act, simulate (d substeps),
terminate, reward, reset, command, events, observe. Rewards therefore see the
pre-reset state while observations see the post-reset state, and both facts
are load-bearing for the tests.

A capture ring records every substep (controls written, pre-integration);
when the termination stage detects NaN/Inf state the ring is dumped to disk
together with the full config and model field values, so a crash can be
replayed bit-exactly from the file alone.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import mdp  # noqa: F401  (registers the built-in terms)
from .capture import (
    CaptureRing,
    dump_capture,
    load_capture,
    model_field_metadata,
)
from .config import config_hash, to_dict
from .entity import DefaultState, Entity, EntityData
from .managers import (
    ActionManager,
    ActionTermCfg,
    CommandCfg,
    CommandManager,
    CurriculumManager,
    CurriculumTermCfg,
    EventManager,
    EventTermCfg,
    ObsGroupCfg,
    ObservationManager,
    RewardManager,
    RewardTermCfg,
    TerminationManager,
    TerminationTermCfg,
)
from .rng import StreamPack
from .sensors import ContactSensor, ContactSensorCfg, RayScanCfg, RayScanner
from .sim import BatchState, StepPipeline, compile_model, restore, snapshot
from .sim.spec import ModelSpec
from .terrain import TerrainGridCfg, generate_grid

__all__ = ["EnvCfg", "SceneCfg", "InitStateCfg", "ManagerBasedRlEnv", "load_capture"]


@dataclass
class InitStateCfg:
    base_pose: tuple[float, float, float] = (0.0, 0.48, 0.0)
    base_vel: tuple[float, float, float] = (0.0, 0.0, 0.0)
    joint_pos: tuple[float, ...] = ()
    joint_vel: tuple[float, ...] = ()


@dataclass
class SceneCfg:
    model: ModelSpec = field(default_factory=ModelSpec)
    terrain: TerrainGridCfg = field(default_factory=TerrainGridCfg)
    num_envs: int = 16
    # global id of world 0; lets a 1-world env reproduce any batch member
    world_id_offset: int = 0
    init_state: InitStateCfg = field(default_factory=InitStateCfg)
    ray_scan: RayScanCfg = field(default_factory=RayScanCfg)
    contact_history: int = 3
    spawn_offset: float = 0.5  # meters into a patch's flat margin


@dataclass
class EnvCfg:
    scene: SceneCfg = field(default_factory=SceneCfg)
    # None defers to the model spec's values
    physics_dt: float | None = None
    decimation: int | None = None
    episode_length_s: float = 20.0
    actions: dict[str, ActionTermCfg] = field(default_factory=dict)
    observations: dict[str, ObsGroupCfg] = field(default_factory=dict)
    rewards: dict[str, RewardTermCfg] = field(default_factory=dict)
    terminations: dict[str, TerminationTermCfg] = field(default_factory=dict)
    events: dict[str, EventTermCfg] = field(default_factory=dict)
    commands: CommandCfg = field(default_factory=CommandCfg)
    curriculum: dict[str, CurriculumTermCfg] = field(default_factory=dict)
    capture_len: int = 200
    capture_dir: str = "captures"
    seed: int = 0


class ManagerBasedRlEnv:
    def __init__(self, cfg: EnvCfg, task_id: str = ""):
        self.cfg = cfg
        self.task_id = task_id
        spec = cfg.scene.model
        if cfg.physics_dt is not None:
            spec.physics_dt = cfg.physics_dt
        if cfg.decimation is not None:
            spec.decimation = cfg.decimation
        self.physics_dt = spec.physics_dt
        self.decimation = spec.decimation
        self.dt_control = self.physics_dt * self.decimation
        self.max_episode_steps = int(np.ceil(cfg.episode_length_s / self.dt_control - 1e-9))
        self.num_envs = cfg.scene.num_envs

        self.config_hash = config_hash(cfg)
        self.terrain = generate_grid(cfg.scene.terrain, cfg.seed)
        self.model = compile_model(spec, self.num_envs)
        self.state = BatchState(self.model)
        self.world_ids = cfg.scene.world_id_offset + np.arange(self.num_envs)
        self.streams = StreamPack(cfg.seed, self.world_ids)

        init = cfg.scene.init_state
        k = self.model.num_joints
        self.default_joint_pos = np.asarray(init.joint_pos or (0.0,) * k, dtype=np.float64)
        self.robot = Entity(
            spec.name,
            joint_names=self.model.joint_names,
            default_state=DefaultState(
                base_pose=init.base_pose,
                base_vel=init.base_vel,
                joint_pos=tuple(self.default_joint_pos),
                joint_vel=tuple(init.joint_vel or (0.0,) * k),
            ),
            pos_limits=self.model.pos_limits,
        )
        self.entities = {
            spec.name: self.robot,
            "terrain": Entity("terrain", base_type="fixed"),
        }
        self.entity_data = EntityData(self.model)
        self.contact_sensor = ContactSensor(
            ContactSensorCfg(history_length=cfg.scene.contact_history),
            self.num_envs,
            len(self.model.feet),
        )
        self.ray_scanner = RayScanner(cfg.scene.ray_scan, self.num_envs)
        self.pipeline = StepPipeline(self.model, self.terrain)
        self.capture = CaptureRing(cfg.capture_len, self.num_envs, self.model.nq, k)

        # per-world curriculum / episode bookkeeping
        self.terrain_rows = np.zeros(self.num_envs, dtype=np.int64)
        self.terrain_cols = (self.world_ids % self.terrain.cols).astype(np.int64)
        self.episode_steps = np.zeros(self.num_envs, dtype=np.int64)
        self.episode_start_x = np.zeros(self.num_envs)
        self.commanded_distance = np.zeros(self.num_envs)
        self.prev_lin_vel_b = np.zeros((self.num_envs, 2))
        self.global_step = 0
        self.dump_paths: list[str] = []
        self._startup_done = False

        # seed the state so observation-dim probing sees a sane pose
        self.robot.write_default_state(self.state, np.arange(self.num_envs))
        self._place_on_terrain(np.arange(self.num_envs))
        self.entity_data.refresh(self.model, self.state)

        self.action_manager = ActionManager(cfg.actions, self)
        self.command_manager = CommandManager(cfg.commands, self)
        self.reward_manager = RewardManager(cfg.rewards, self)
        self.termination_manager = TerminationManager(cfg.terminations, self)
        self.event_manager = EventManager(cfg.events, self)
        self.curriculum_manager = CurriculumManager(cfg.curriculum, self)
        self.observation_manager = ObservationManager(cfg.observations, self)

    # -- reset ---------------------------------------------------------------

    def _place_on_terrain(self, ids: np.ndarray) -> None:
        origins = np.array(
            [
                self.terrain.spawn_origin(int(r), int(c))
                for r, c in zip(self.terrain_rows[ids], self.terrain_cols[ids])
            ]
        )
        spawn_x = origins + self.cfg.scene.spawn_offset
        self.state.q[ids, 0] += spawn_x
        self.state.q[ids, 1] += self.terrain.heights(spawn_x)

    def _reset_worlds(self, ids: np.ndarray) -> None:
        self.robot.write_default_state(self.state, ids)
        self._place_on_terrain(ids)
        self.event_manager.apply_reset(ids)
        self.command_manager.resample(ids)
        self.action_manager.reset(ids)
        self.contact_sensor.reset(ids)
        self.ray_scanner._cached_step = -1
        cache = self.state.contact
        cache.normal_force[ids] = 0.0
        cache.tangent_force[ids] = 0.0
        cache.foot_vel[ids] = 0.0
        cache.in_contact[ids] = False
        self.observation_manager.mark_reset(ids)
        finalized = self.reward_manager.reset(ids)
        self.episode_steps[ids] = 0
        self.episode_start_x[ids] = self.state.q[ids, 0]
        self.commanded_distance[ids] = 0.0
        self._last_finalized = (ids, finalized)

    def reset(self, seed: int | None = None) -> dict[str, np.ndarray]:
        """Start fresh episodes in every world and return the first obs."""
        if seed is not None:
            self.streams = StreamPack(seed, self.world_ids)
            self._startup_done = False
        if not self._startup_done:
            self.event_manager.apply_startup()
            self._startup_done = True
        all_ids = np.arange(self.num_envs)
        self._reset_worlds(all_ids)
        self.entity_data.refresh(self.model, self.state)
        self.prev_lin_vel_b[...] = self.entity_data.root_lin_vel_b
        obs = self.observation_manager.compute_all()
        return obs

    # -- step ----------------------------------------------------------------

    def step(self, actions: np.ndarray):
        """One control step through the fixed eight-stage pipeline.

        Returns (obs groups, reward, terminated, truncated, extras).
        """
        self.global_step += 1
        # 1. act
        self.action_manager.process(actions)
        # 2. simulate: d decimation substeps
        for _ in range(self.decimation):
            self.action_manager.apply()
            self.capture.push(self.state)
            self.pipeline.substep(self.state)
            self.entity_data.refresh(self.model, self.state)
            self.contact_sensor.update(self.state, self.physics_dt)
        # 3. terminate
        self.episode_steps += 1
        self.commanded_distance += (
            np.abs(self.command_manager.command[:, 0]) * self.dt_control
        )
        terminated, truncated = self.termination_manager.compute()
        if self.termination_manager.last_nonfinite.any():
            self._dump_on_nonfinite()
        # 4. reward (pre-reset state)
        reward = self.reward_manager.compute(self.dt_control)
        # 5. reset flagged worlds (curriculum first: it reads the old episode)
        reset_ids = np.flatnonzero(terminated | truncated)
        self._last_finalized = (reset_ids, {})
        self.curriculum_manager.update(reset_ids)
        if reset_ids.size:
            self._reset_worlds(reset_ids)
            self.entity_data.refresh(self.model, self.state)
        # 6. command
        self.command_manager.update()
        # 7. interval events
        self.event_manager.apply_interval(self.dt_control)
        # 8. observe (post-reset state)
        obs = self.observation_manager.compute_all()
        self.prev_lin_vel_b[...] = self.entity_data.root_lin_vel_b
        extras = self._build_extras(reset_ids)
        return obs, reward, terminated, truncated, extras

    def _build_extras(self, reset_ids: np.ndarray) -> dict[str, np.ndarray]:
        extras: dict[str, np.ndarray] = {"reset_ids": reset_ids}
        ids, finalized = self._last_finalized
        for name, values in finalized.items():
            extras[f"episode_reward/{name}"] = values
        for name, value in self.reward_manager.last_values.items():
            extras[f"reward/{name}"] = value
        for name, count in self.termination_manager.trigger_counts.items():
            extras[f"termination_count/{name}"] = np.int64(count)
        extras["curriculum/terrain_rows"] = self.terrain_rows
        extras["nonfinite_worlds"] = self.termination_manager.last_nonfinite
        return extras

    # -- capture -------------------------------------------------------------

    def _dump_on_nonfinite(self) -> None:
        os.makedirs(self.cfg.capture_dir, exist_ok=True)
        path = os.path.join(self.cfg.capture_dir, f"capture_step{self.state.sim_step}.bin")
        self.dump_capture(path)
        self.dump_paths.append(path)

    def dump_capture(self, path: str) -> None:
        metadata = {
            "offending_observation_terms": sorted(self.observation_manager.nonfinite_report),
            "offending_reward_terms": sorted(self.reward_manager.nonfinite_report),
            "nonfinite_worlds": np.flatnonzero(
                self.termination_manager.last_nonfinite
            ).tolist(),
            "fields": model_field_metadata(self.model),
        }
        dump_capture(
            path,
            self.capture,
            self.config_hash,
            task_id=self.task_id,
            config_json=to_dict(self.cfg),
            metadata=metadata,
        )

    # convenience passthroughs used by tests and the viewer bridge
    def snapshot(self):
        return snapshot(self.state)

    def restore(self, frame) -> None:
        restore(self.state, frame)

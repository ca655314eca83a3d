"""Scene entities and their per-world derived kinematics.

One Entity class covers every object in the scene; fixed-vs-floating base and
articulated-vs-rigid are runtime flags, not subclasses. The reference scene
holds a floating articulated robot and a fixed terrain entity, both living in
a plain name-keyed registry.

EntityData is the read-only window that observation, reward and termination
terms see: root pose and twist (world and base frame), joint states, body
positions from forward kinematics, projected gravity and foot contacts. It is
refreshed once per physics substep, after integration; reading it never
touches simulation state.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .sim.model import Model
from .sim.physics import fk_batch
from .sim.state import BatchState


class EntityError(ValueError):
    pass


@dataclass
class DefaultState:
    base_pose: tuple[float, float, float] = (0.0, 0.5, 0.0)  # x, z, pitch
    base_vel: tuple[float, float, float] = (0.0, 0.0, 0.0)
    joint_pos: tuple[float, ...] = ()
    joint_vel: tuple[float, ...] = ()


class Entity:
    """A named scene object with name-resolvable joints and a default state."""

    def __init__(
        self,
        name: str,
        joint_names: list[str] | None = None,
        default_state: DefaultState | None = None,
        base_type: str = "floating",
        pos_limits: np.ndarray | None = None,
    ):
        if base_type not in ("fixed", "floating"):
            raise EntityError(f"base_type must be 'fixed' or 'floating', got {base_type!r}")
        self.name = name
        self.joint_names = list(joint_names or [])
        self.body_names = [f"{name}_base"] + [f"{j}_link" for j in self.joint_names]
        self.base_type = base_type
        self.default_state = default_state or DefaultState()
        k = len(self.joint_names)
        if len(self.default_state.joint_pos) not in (0, k):
            raise EntityError(
                f"default joint_pos has {len(self.default_state.joint_pos)} entries "
                f"for {k} joints"
            )
        if pos_limits is not None and k:
            pos = np.asarray(self.default_state.joint_pos or np.zeros(k))
            if np.any(pos < pos_limits[:, 0]) or np.any(pos > pos_limits[:, 1]):
                raise EntityError("default joint positions violate position limits")

    @property
    def is_fixed_base(self) -> bool:
        return self.base_type == "fixed"

    @property
    def is_articulated(self) -> bool:
        return len(self.joint_names) > 0

    def find_joints(self, patterns: list[str]) -> list[int]:
        """Indices of joints fully matching any pattern, in model order."""
        matched: list[int] = []
        for pattern in patterns:
            prog = re.compile(pattern)
            for i, name in enumerate(self.joint_names):
                if prog.fullmatch(name) and i not in matched:
                    matched.append(i)
        if not matched:
            raise EntityError(
                f"patterns {patterns!r} match no joints of {self.name!r}; "
                f"available: {', '.join(self.joint_names) or 'none'}"
            )
        return sorted(matched)

    def write_default_state(self, state: BatchState, world_ids: np.ndarray) -> None:
        """Reset q/qd of the listed worlds; all other worlds stay untouched."""
        world_ids = np.asarray(world_ids, dtype=np.int64)
        if world_ids.size and (world_ids.min() < 0 or world_ids.max() >= state.n_worlds):
            raise EntityError(
                f"world ids {world_ids.tolist()} outside [0, {state.n_worlds})"
            )
        ds = self.default_state
        state.q[world_ids, 0:3] = ds.base_pose
        state.qd[world_ids, 0:3] = ds.base_vel
        k = state.q.shape[1] - 3
        if k:
            state.q[world_ids, 3:] = ds.joint_pos or np.zeros(k)
            state.qd[world_ids, 3:] = ds.joint_vel or np.zeros(k)
        state.time[world_ids] = 0.0


class EntityData:
    """Derived kinematics for the robot entity, one row per world.

    ``refresh`` runs once per physics substep, after integration. Body
    positions (full forward kinematics) are materialized lazily on first
    access per substep; the value is identical to an eager refresh, the FK
    just isn't paid for when nothing reads it.
    """

    def __init__(self, model: Model):
        n, k = model.n_worlds, model.num_joints
        n_feet = len(model.feet)
        self.root_pos = np.zeros((n, 2))
        self.root_pitch = np.zeros(n)
        self.root_lin_vel_w = np.zeros((n, 2))
        self.root_lin_vel_b = np.zeros((n, 2))
        self.root_ang_vel = np.zeros(n)
        self.joint_pos = np.zeros((n, k))
        self.joint_vel = np.zeros((n, k))
        self.projected_gravity = np.zeros((n, 2))
        self.foot_in_contact = np.zeros((n, n_feet), dtype=bool)
        self.foot_forces = np.zeros((n, n_feet, 2))  # (tangent, normal)
        self.foot_vel = np.zeros((n, n_feet, 2))
        self._model = model
        self._body_pos = np.zeros((n, 1 + k, 2))  # base + each link tip
        self._body_pos_fresh = False
        self._q = None

    @property
    def body_pos(self) -> np.ndarray:
        if not self._body_pos_fresh:
            _, _, tips = fk_batch(self._model, self._q)
            self._body_pos[:, 0, :] = self._q[:, 0:2]
            self._body_pos[:, 1:, :] = tips
            self._body_pos_fresh = True
        return self._body_pos

    def refresh(self, model: Model, state: BatchState) -> None:
        q, qd = state.q, state.qd
        self.root_pos[...] = q[:, 0:2]
        self.root_pitch[...] = q[:, 2]
        self.root_lin_vel_w[...] = qd[:, 0:2]
        self.root_ang_vel[...] = qd[:, 2]
        c, s = np.cos(q[:, 2]), np.sin(q[:, 2])
        # base-frame velocity = R(pitch)^T * world velocity
        self.root_lin_vel_b[:, 0] = c * qd[:, 0] + s * qd[:, 1]
        self.root_lin_vel_b[:, 1] = -s * qd[:, 0] + c * qd[:, 1]
        self.projected_gravity[:, 0] = -s
        self.projected_gravity[:, 1] = -c
        self.joint_pos[...] = q[:, 3:]
        self.joint_vel[...] = qd[:, 3:]
        self._q = q
        self._body_pos_fresh = False
        cache = state.contact
        self.foot_in_contact[...] = cache.in_contact
        self.foot_forces[:, :, 0] = cache.tangent_force
        self.foot_forces[:, :, 1] = cache.normal_force
        self.foot_vel[...] = cache.foot_vel

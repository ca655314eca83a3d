"""Batched planar dynamics: kinematics, spring-damper contact, integration.

The dynamics are deliberately diagonal: base x/z carry the robot's total
mass, pitch the base inertia, each joint its rotor inertia, with no Coriolis
or off-diagonal coupling. Contact, however, couples into every degree of
freedom through the exact planar Jacobian transpose, which is what makes the
backend behave like a legged robot rather than k independent integrators.

All functions are vectorized over the leading world dimension and elementwise
per world, so stepping a batch produces bit-for-bit the trajectory each world
would produce alone.
"""

from __future__ import annotations

import numpy as np

from .model import Model
from .state import BatchState


def fk_batch_trig(model: Model, q: np.ndarray):
    """Chain kinematics plus the link-angle trig, vectorized over worlds.

    Returns (thetas, attach, tips, sin_t, cos_t): absolute link angles (N, k),
    joint pivot positions (N, k, 2), link tip positions (N, k, 2) and the
    sines/cosines of the link angles. A link at absolute angle T points along
    (sin T, -cos T), i.e. straight down at zero.
    """
    n = q.shape[0]
    k = model.num_joints
    base_x, base_z, pitch = q[:, 0], q[:, 1], q[:, 2]
    thetas = np.empty((n, k))
    for j in range(k):
        parent = int(model.parents[j])
        parent_angle = pitch if parent == -1 else thetas[:, parent]
        thetas[:, j] = parent_angle + q[:, 3 + j]
    # one trig pass over all link angles instead of per-joint calls
    sin_t, cos_t = np.sin(thetas), np.cos(thetas)
    sin_p, cos_p = np.sin(pitch), np.cos(pitch)
    attach = np.empty((n, k, 2))
    tips = np.empty((n, k, 2))
    for j in range(k):
        parent = int(model.parents[j])
        ox, oz = model.attach_offsets[j]
        if parent == -1:
            s, c = sin_p, cos_p
            px, pz = base_x, base_z
        else:
            s, c = sin_t[:, parent], cos_t[:, parent]
            px, pz = attach[:, parent, 0], attach[:, parent, 1]
        attach[:, j, 0] = px + (c * ox - s * oz)
        attach[:, j, 1] = pz + (s * ox + c * oz)
        length = model.link_lengths[j]
        tips[:, j, 0] = attach[:, j, 0] + length * sin_t[:, j]
        tips[:, j, 1] = attach[:, j, 1] - length * cos_t[:, j]
    return thetas, attach, tips, sin_t, cos_t


def fk_batch(model: Model, q: np.ndarray):
    """Chain kinematics for a (N, nq) batch: (thetas, attach, tips)."""
    thetas, attach, tips, _, _ = fk_batch_trig(model, q)
    return thetas, attach, tips


def forward_kinematics(model: Model, q_row: np.ndarray):
    """Body poses for one configuration row: (base pose (3,), tips (k, 2))."""
    q_row = np.asarray(q_row, dtype=np.float64)
    if q_row.shape != (model.nq,):
        raise ValueError(f"expected q of shape ({model.nq},), got {q_row.shape}")
    _, _, tips = fk_batch(model, q_row[None, :])
    return q_row[:3].copy(), tips[0]


def compute_contact(model: Model, heights, q: np.ndarray, qd: np.ndarray, friction, k_n, c_n, k_t):
    """Foot contact terms for a configuration batch.

    Returns (thetas, attach, tips, sin_t, f_n, f_t, foot_vel, touching);
    forces are zero without penetration, and |f_t| <= friction * f_n always.
    ``heights`` maps x arrays to terrain heights.
    """
    thetas, attach, tips, sin_t, _ = fk_batch_trig(model, q)
    feet = [int(f) for f in model.feet]
    n, n_feet = q.shape[0], len(feet)
    f_n = np.zeros((n, n_feet))
    f_t = np.zeros((n, n_feet))
    vel = np.zeros((n, n_feet, 2))
    touch = np.zeros((n, n_feet), dtype=bool)
    base_x, base_z = q[:, 0], q[:, 1]
    for i, foot in enumerate(feet):
        chain = model.chains[foot]
        px, pz = tips[:, foot, 0], tips[:, foot, 1]
        # v = J qd, built from the same lever arms the force coupling uses
        vx = qd[:, 0] - qd[:, 2] * (pz - base_z)
        vz = qd[:, 1] + qd[:, 2] * (px - base_x)
        for j in chain:
            vx -= qd[:, 3 + j] * (pz - attach[:, j, 1])
            vz += qd[:, 3 + j] * (px - attach[:, j, 0])
        phi = heights(px) - pz
        touching = phi > 0.0
        normal = np.maximum(0.0, k_n * phi - c_n * vz)
        normal = np.where(touching, normal, 0.0)
        bound = friction * normal
        tangent = np.clip(-k_t * vx, -bound, bound)
        tangent = np.where(touching, tangent, 0.0)
        f_n[:, i] = normal
        f_t[:, i] = tangent
        vel[:, i, 0] = vx
        vel[:, i, 1] = vz
        touch[:, i] = touching
    return thetas, attach, tips, sin_t, f_n, f_t, vel, touch


def contact_preview(model: Model, q: np.ndarray, qd: np.ndarray, terrain=None):
    """Contact quantities recomputed from coordinates (viewer/replay use)."""
    heights = (lambda x: np.zeros_like(x)) if terrain is None else terrain.heights
    spec = model.spec
    with np.errstate(invalid="ignore", over="ignore"):
        _, _, tips, _, f_n, f_t, vel, touch = compute_contact(
            model,
            heights,
            q,
            qd,
            model.field("friction").value,
            spec.contact_stiffness,
            spec.contact_damping,
            spec.tangential_gain,
        )
    feet = [int(f) for f in model.feet]
    return tips[:, feet, :], f_n, f_t, touch


class StepPipeline:
    """Specialized substep closures over the model's current field layout.

    The stage list is rebuilt (and the generation advances with the model's)
    whenever a field expands from shared to per-world storage; re-running the
    pipeline on identical inputs gives bitwise-identical outputs.
    """

    def __init__(self, model: Model, terrain=None, transient: bool = False):
        self.model = model
        self.terrain = terrain
        self._stages: list = []
        if not transient:
            model.on_layout_change(self._rebuild)
        self._rebuild()

    @property
    def generation(self) -> int:
        return self.model.generation

    def _heights(self, x: np.ndarray) -> np.ndarray:
        if self._flat_ground:
            return np.zeros_like(x)
        return self.terrain.heights(x)

    def _rebuild(self) -> None:
        model = self.model
        spec = model.spec
        dt = model.physics_dt
        k = model.num_joints
        feet = [int(f) for f in model.feet]
        chains = [model.chains[f] for f in feet]
        # all-zero heightfields take the same fast path as "no terrain"
        self._flat_ground = self.terrain is None or not np.any(self.terrain.samples)
        # specialize to the current shared/expanded storage objects
        base_mass = model.field("base_mass").value
        base_inertia = model.field("base_inertia").value
        link_mass = model.field("link_mass").value
        rotor_inertia = model.field("rotor_inertia").value
        damping = model.field("damping").value
        friction = model.field("friction").value
        half_lengths = 0.5 * model.link_lengths
        g = model.gravity
        k_n, c_n, k_t = spec.contact_stiffness, spec.contact_damping, spec.tangential_gain

        def stage_contact(state: BatchState, scratch: dict) -> None:
            thetas, attach, tips, sin_t, f_n, f_t, vel, touch = compute_contact(
                model, self._heights, state.q, state.qd, friction, k_n, c_n, k_t
            )
            scratch["thetas"] = thetas
            scratch["sin_thetas"] = sin_t
            scratch["attach"] = attach
            scratch["tips"] = tips
            scratch["f_n"] = f_n
            scratch["f_t"] = f_t
            scratch["foot_vel"] = vel
            scratch["touching"] = touch

        def stage_forces(state: BatchState, scratch: dict) -> None:
            qd = state.qd
            attach = scratch["attach"]
            tips = scratch["tips"]
            tau = np.zeros_like(state.q)
            tau[:, 3:] += state.ctrl
            tau[:, 3:] -= damping * qd[:, 3:]
            m_total = base_mass + link_mass.sum(axis=-1)
            tau[:, 1] -= m_total * g
            tau[:, 3:] -= link_mass * g * half_lengths * scratch["sin_thetas"]
            tau[:, 0] += state.ext_force[:, 0]
            tau[:, 1] += state.ext_force[:, 1]
            base = state.q[:, 0:2]
            for i, (foot, chain) in enumerate(zip(feet, chains)):
                fx, fz = scratch["f_t"][:, i], scratch["f_n"][:, i]
                px, pz = tips[:, foot, 0], tips[:, foot, 1]
                tau[:, 0] += fx
                tau[:, 1] += fz
                tau[:, 2] += (px - base[:, 0]) * fz - (pz - base[:, 1]) * fx
                for j in chain:
                    tau[:, 3 + j] += (px - attach[:, j, 0]) * fz - (pz - attach[:, j, 1]) * fx
            state.ext_force[...] = 0.0
            scratch["tau"] = tau
            scratch["m_total"] = m_total

        def stage_integrate(state: BatchState, scratch: dict) -> None:
            tau = scratch["tau"]
            inv_m = 1.0 / scratch["m_total"]
            tau[:, 0] *= inv_m
            tau[:, 1] *= inv_m
            tau[:, 2] *= 1.0 / base_inertia
            tau[:, 3:] *= 1.0 / rotor_inertia
            state.qd += tau * dt
            state.q += state.qd * dt

        def stage_finalize(state: BatchState, scratch: dict) -> None:
            cache = state.contact
            cache.normal_force[...] = scratch["f_n"]
            cache.tangent_force[...] = scratch["f_t"]
            cache.foot_vel[...] = scratch["foot_vel"]
            for i, foot in enumerate(feet):
                cache.foot_pos[:, i, :] = scratch["tips"][:, foot, :]
            cache.in_contact[...] = scratch["touching"]
            state.time += dt
            state.sim_step += 1

        self._stages = [stage_contact, stage_forces, stage_integrate, stage_finalize]

    def substep(self, state: BatchState) -> None:
        """Advance every world by one physics_dt.

        The contact cache afterwards holds the forces applied during this
        substep (evaluated at its start). Nonfinite values propagate without
        raising; detection is the termination stage's job.
        """
        scratch: dict = {}
        with np.errstate(invalid="ignore", over="ignore"):
            for stage in self._stages:
                stage(state, scratch)


def physics_step(model: Model, state: BatchState, terrain=None) -> None:
    """One-off substep without keeping a pipeline around (tests, replay)."""
    StepPipeline(model, terrain, transient=True).substep(state)

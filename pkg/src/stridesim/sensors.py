"""Sensors over the batched state: terrain height scan and foot contacts.

Sensors share a tiny caching contract: a sensor's compute runs at most once
per sim_step, so reward and observation terms can read the same sensor in the
same control step for free. The ray scanner is lazy (computed on first read);
the contact sensor is push-updated every substep because its timers integrate
the contact phase signal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .entity import EntityData
from .sim.state import BatchState


@dataclass
class RayScanCfg:
    # horizontal offsets from the base, in meters
    offsets: tuple[float, ...] = (-0.4, -0.2, 0.0, 0.2, 0.4)


class RayScanner:
    """Vertical height probes: terrain height minus base height per offset."""

    def __init__(self, cfg: RayScanCfg, n_worlds: int):
        self.cfg = cfg
        self.offsets = np.asarray(cfg.offsets, dtype=np.float64)
        self._cache = np.zeros((n_worlds, len(self.offsets)))
        self._cached_step = -1
        self.compute_count = 0

    def read(self, terrain, data: EntityData, state: BatchState) -> np.ndarray:
        if state.sim_step != self._cached_step:
            xs = data.root_pos[:, 0:1] + self.offsets[None, :]
            if terrain is None:
                heights = np.zeros_like(xs)
            else:
                heights = terrain.heights(xs)
            self._cache = heights - data.root_pos[:, 1:2]
            self._cached_step = state.sim_step
            self.compute_count += 1
        return self._cache


# "never landed" marker: far enough in the past that no recency window
# (sim_step - substeps) can reach it
NEVER_TOUCHED = -(1 << 40)


@dataclass
class ContactSensorCfg:
    history_length: int = 3


class ContactSensor:
    """Per-foot contact bookkeeping: phase timers and a force history ring.

    ``update`` must run once per physics substep. Timers accumulate dt in the
    active phase; liftoff finalizes the contact timer, touchdown latches
    ``last_air_time`` and records the touchdown substep (so control-rate
    consumers can ask "did this foot land within the last d substeps?").
    """

    def __init__(self, cfg: ContactSensorCfg, n_worlds: int, n_feet: int):
        self.cfg = cfg
        shape = (n_worlds, n_feet)
        self.in_contact = np.zeros(shape, dtype=bool)
        self.normal_force = np.zeros(shape)
        self.tangent_force = np.zeros(shape)
        self.force_history = np.zeros((cfg.history_length,) + shape)  # newest-first
        self.current_air_time = np.zeros(shape)
        self.last_air_time = np.zeros(shape)
        self.current_contact_time = np.zeros(shape)
        self.last_touchdown_step = np.full(shape, NEVER_TOUCHED, dtype=np.int64)
        self._last_update_step = -1

    def reset(self, ids: np.ndarray) -> None:
        self.in_contact[ids] = False
        self.normal_force[ids] = 0.0
        self.tangent_force[ids] = 0.0
        self.force_history[:, ids] = 0.0
        self.current_air_time[ids] = 0.0
        self.last_air_time[ids] = 0.0
        self.current_contact_time[ids] = 0.0
        self.last_touchdown_step[ids] = NEVER_TOUCHED

    def update(self, state: BatchState, dt: float) -> None:
        if state.sim_step == self._last_update_step:
            return  # at most one compute per sim_step
        self._last_update_step = state.sim_step
        cache = state.contact
        now = cache.in_contact
        prev = self.in_contact
        touchdown = now & ~prev
        liftoff = ~now & prev
        # touchdown latches the just-finished air phase
        self.last_air_time = np.where(touchdown, self.current_air_time, self.last_air_time)
        self.last_touchdown_step = np.where(
            touchdown, state.sim_step, self.last_touchdown_step
        )
        self.current_contact_time = np.where(
            now, np.where(touchdown, dt, self.current_contact_time + dt), 0.0
        )
        self.current_air_time = np.where(
            now, 0.0, np.where(liftoff, dt, self.current_air_time + dt)
        )
        self.in_contact = now.copy()
        self.normal_force[...] = cache.normal_force
        self.tangent_force[...] = cache.tangent_force
        self.force_history = np.roll(self.force_history, 1, axis=0)
        self.force_history[0] = cache.normal_force

    def touched_down_within(self, sim_step: int, substeps: int) -> np.ndarray:
        return self.last_touchdown_step > sim_step - substeps

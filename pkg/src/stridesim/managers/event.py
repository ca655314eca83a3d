"""Event manager: startup, reset and interval hooks, mostly randomization.

Interval terms keep a per-world stopwatch: when it passes the drawn target
the term fires for exactly those worlds and a fresh target is drawn from the
configured range. Targets are quantized to whole control steps and clipped
back into the range, so observed inter-event gaps always lie inside
``interval_range``.
"""

from __future__ import annotations

import numpy as np

from ..rng import StreamPack
from ..sim.model import Model
from .base import EVENT_TERMS, EventTermCfg, ManagerError, resolve


def randomize_field(
    model: Model,
    streams: StreamPack,
    field: str,
    distribution: str,
    rng_range: tuple[float, float],
    operation: str,
    world_ids: np.ndarray,
    purpose: str,
) -> None:
    """Expand (if needed) and rewrite a model field for the listed worlds.

    Draws always apply against the compile-time base value, so repeated scale
    or add events re-randomize rather than compound.
    """
    model.expand_field(field)
    f = model.field(field)
    size = int(np.prod(f.base.shape)) if f.base.shape else 1
    if distribution == "uniform":
        draw = streams.uniform(purpose, rng_range[0], rng_range[1], world_ids, size)
    elif distribution == "gaussian":
        draw = rng_range[0] + streams.normal(purpose, rng_range[1], world_ids, size)
    else:
        raise ManagerError(f"unknown distribution {distribution!r}")
    draw = draw.reshape((len(world_ids),) + f.base.shape)
    base = np.broadcast_to(f.base, (len(world_ids),) + f.base.shape)
    if operation == "set":
        f.value[world_ids] = draw
    elif operation == "scale":
        f.value[world_ids] = base * draw
    elif operation == "add":
        f.value[world_ids] = base + draw
    else:
        raise ManagerError(f"unknown field operation {operation!r}")


class EventManager:
    def __init__(self, cfg: dict[str, EventTermCfg], env):
        self.env = env
        self.cfg = cfg
        self.terms = {}
        self._elapsed: dict[str, np.ndarray] = {}
        self._target: dict[str, np.ndarray] = {}
        for name, term_cfg in cfg.items():
            if term_cfg.mode not in ("startup", "reset", "interval"):
                raise ManagerError(f"event {name!r}: unknown mode {term_cfg.mode!r}")
            self.terms[name] = resolve(EVENT_TERMS, term_cfg.func, "event")
            if term_cfg.mode == "interval":
                rng = term_cfg.interval_range
                if rng is None or not 0 < rng[0] <= rng[1]:
                    raise ManagerError(
                        f"event {name!r}: interval mode needs a positive ordered range"
                    )
                n = env.num_envs
                self._elapsed[name] = np.zeros(n)
                self._target[name] = np.zeros(n)
                self._draw_targets(name, np.arange(n))

    def _draw_targets(self, name: str, ids: np.ndarray) -> None:
        lo, hi = self.cfg[name].interval_range
        dt = self.env.dt_control
        draw = self.env.streams.uniform(f"event.{name}.interval", lo, hi, ids, 1)[:, 0]
        # quantize to whole control steps, then clip back into [lo, hi]
        quantized = np.round(draw / dt) * dt
        lo_q, hi_q = np.ceil(lo / dt) * dt, np.floor(hi / dt) * dt
        self._target[name][ids] = np.clip(quantized, lo_q, hi_q)

    def apply_startup(self) -> None:
        all_ids = np.arange(self.env.num_envs)
        for name, term_cfg in self.cfg.items():
            if term_cfg.mode == "startup":
                self.terms[name](self.env, all_ids, **term_cfg.params)

    def apply_reset(self, ids: np.ndarray) -> None:
        if not len(ids):
            return
        for name, term_cfg in self.cfg.items():
            if term_cfg.mode == "reset":
                self.terms[name](self.env, ids, **term_cfg.params)
            elif term_cfg.mode == "interval":
                # fresh episode, fresh phase
                self._elapsed[name][ids] = 0.0
                self._draw_targets(name, ids)

    def apply_interval(self, dt: float) -> None:
        for name, term_cfg in self.cfg.items():
            if term_cfg.mode != "interval":
                continue
            elapsed = self._elapsed[name]
            elapsed += dt
            fire = elapsed >= self._target[name] - 0.5 * dt
            if fire.any():
                ids = np.flatnonzero(fire)
                self.terms[name](self.env, ids, **term_cfg.params)
                elapsed[ids] = 0.0
                self._draw_targets(name, ids)

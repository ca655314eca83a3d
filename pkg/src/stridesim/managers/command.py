"""Command manager: per-world goal signals, periodically resampled.

Ranges are stored per world (initialized from the config) so that a
curriculum widening one world's command distribution never touches another
world's draws -- world independence survives performance-gated curricula.
"""

from __future__ import annotations

import numpy as np

from .base import CommandCfg, ManagerError


class CommandManager:
    def __init__(self, cfg: CommandCfg, env):
        if cfg.resample_period <= 0:
            raise ManagerError("command resample_period must be > 0")
        for ch, (lo, hi) in cfg.ranges.items():
            if lo > hi:
                raise ManagerError(f"command channel {ch!r}: range must be ordered")
        self.env = env
        self.cfg = cfg
        self.channels = list(cfg.ranges)
        n, c = env.num_envs, len(self.channels)
        base = np.array([cfg.ranges[ch] for ch in self.channels])  # (C, 2)
        self.initial_ranges = np.broadcast_to(base, (n, c, 2)).copy()
        self.ranges = self.initial_ranges.copy()
        self.command = np.zeros((n, c))
        self.period_steps = max(1, int(round(cfg.resample_period / env.dt_control)))
        self.countdown = np.full(n, self.period_steps, dtype=np.int64)

    def resample(self, ids: np.ndarray) -> None:
        if not len(ids):
            return
        lo = self.ranges[ids, :, 0]
        hi = self.ranges[ids, :, 1]
        self.command[ids] = self.env.streams.uniform("command", lo, hi, ids, len(self.channels))
        self.countdown[ids] = self.period_steps

    def update(self) -> None:
        """Per control step: tick countdowns, resample expired worlds."""
        self.countdown -= 1
        expired = np.flatnonzero(self.countdown <= 0)
        self.resample(expired)

    def widen(self, ids: np.ndarray, factor: float) -> None:
        """Scale the listed worlds' ranges, capped at cap_scale * initial."""
        bound = np.abs(self.initial_ranges[ids]) * self.cfg.cap_scale
        self.ranges[ids] = np.clip(self.ranges[ids] * factor, -bound, bound)

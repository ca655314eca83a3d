"""Termination manager: failure terms, the timeout term, and the NaN guard."""

from __future__ import annotations

import numpy as np

from ..sim.state import detect_nonfinite
from .base import ManagerError, TERMINATION_TERMS, TerminationTermCfg, resolve


class TerminationManager:
    def __init__(self, cfg: dict[str, TerminationTermCfg], env):
        self.env = env
        self.cfg = cfg
        self.terms = {name: resolve(TERMINATION_TERMS, c.func, "termination") for name, c in cfg.items()}
        timeouts = [name for name, c in cfg.items() if c.time_out]
        if len(timeouts) > 1:
            raise ManagerError(f"at most one timeout term allowed, got {timeouts}")
        self.timeout_term = timeouts[0] if timeouts else None
        self.trigger_counts = {name: 0 for name in cfg}
        self.trigger_counts["nonfinite"] = 0
        self.last_nonfinite = np.zeros(env.num_envs, dtype=bool)

    def compute(self) -> tuple[np.ndarray, np.ndarray]:
        """(terminated, truncated) per world; nonfinite state counts as failure."""
        n = self.env.num_envs
        terminated = np.zeros(n, dtype=bool)
        truncated = np.zeros(n, dtype=bool)
        for name, func in self.terms.items():
            mask = np.asarray(func(self.env, **self.cfg[name].params), dtype=bool)
            self.trigger_counts[name] += int(mask.sum())
            if self.cfg[name].time_out:
                truncated |= mask
            else:
                terminated |= mask
        bad = detect_nonfinite(self.env.state)
        self.last_nonfinite = bad
        if bad.any():
            self.trigger_counts["nonfinite"] += int(bad.sum())
            terminated |= bad
        return terminated, truncated

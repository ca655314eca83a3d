"""Reward manager: weighted, timestep-scaled term aggregation."""

from __future__ import annotations

import math

import numpy as np

from .base import ManagerError, REWARD_TERMS, RewardTermCfg, resolve


class RewardManager:
    """total = sum_i weight_i * term_i(state) * dt_control.

    Weights start from the configs but live here so curriculum schedules can
    move them at runtime. Episodic sums track the weighted, dt-scaled
    contribution per term; raw per-step means are kept alongside for
    performance-gated curricula.
    """

    def __init__(self, cfg: dict[str, RewardTermCfg], env):
        self.env = env
        self.cfg = cfg
        self.terms = {}
        for name, term_cfg in cfg.items():
            if not math.isfinite(term_cfg.weight):
                raise ManagerError(f"reward term {name!r}: weight must be finite")
            self.terms[name] = resolve(REWARD_TERMS, term_cfg.func, "reward")
        self.weights = {name: c.weight for name, c in cfg.items()}
        n = env.num_envs
        self.episodic_sums = {name: np.zeros(n) for name in cfg}
        self.episodic_raw = {name: np.zeros(n) for name in cfg}
        self.last_values: dict[str, np.ndarray] = {name: np.zeros(n) for name in cfg}
        self.nonfinite_report: dict[str, np.ndarray] = {}

    def compute(self, dt: float) -> np.ndarray:
        self.nonfinite_report = {}
        total = np.zeros(self.env.num_envs)
        for name, func in self.terms.items():
            value = np.asarray(func(self.env, **self.cfg[name].params), dtype=np.float64)
            bad = ~np.isfinite(value)
            if bad.any():
                self.nonfinite_report[name] = bad
            contribution = self.weights[name] * value * dt
            total += contribution
            self.episodic_sums[name] += contribution
            self.episodic_raw[name] += value
            self.last_values[name] = value
        return total

    def mean_raw(self, name: str, ids: np.ndarray, steps: np.ndarray) -> np.ndarray:
        """Per-step mean of a term's raw value over the finished episode."""
        return self.episodic_raw[name][ids] / np.maximum(steps, 1)

    def reset(self, ids: np.ndarray) -> dict[str, np.ndarray]:
        """Finalize and clear episodic sums for the given worlds."""
        finalized = {}
        for name in self.terms:
            finalized[name] = self.episodic_sums[name][ids].copy()
            self.episodic_sums[name][ids] = 0.0
            self.episodic_raw[name][ids] = 0.0
        return finalized

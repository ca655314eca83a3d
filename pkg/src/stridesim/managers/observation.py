"""Observation manager: groups of processed, delayed, history-stacked terms.

Per-term pipeline, in this order: raw -> clip -> scale -> noise -> delay ->
history. The delay ring stores post-noise values (a delayed observation
reflects the corruption present when it was captured) and is indexed in
control steps. Histories concatenate oldest-first. On a world's reset both
rings are flooded with the reset-time processed value, so the first output
repeats that value H times and a D-delayed term reads the reset value for the
first D steps.
"""

from __future__ import annotations

import numpy as np

from .base import (
    MAX_DELAY_STEPS,
    MAX_HISTORY,
    ManagerError,
    OBSERVATION_TERMS,
    ObsGroupCfg,
    ObsTermCfg,
    resolve,
)


class _ObsTerm:
    def __init__(self, group: str, name: str, cfg: ObsTermCfg, env):
        self.name = name
        self.cfg = cfg
        self.func = resolve(OBSERVATION_TERMS, cfg.func, "observation")
        if cfg.clip is not None and not cfg.clip[0] < cfg.clip[1]:
            raise ManagerError(f"obs term {name!r}: clip range must be ordered")
        if not 0 <= cfg.delay_steps <= MAX_DELAY_STEPS:
            raise ManagerError(f"obs term {name!r}: delay_steps outside [0, {MAX_DELAY_STEPS}]")
        if not 1 <= cfg.history <= MAX_HISTORY:
            raise ManagerError(f"obs term {name!r}: history outside [1, {MAX_HISTORY}]")
        probe = np.atleast_2d(np.asarray(self.func(env, **cfg.params), dtype=np.float64))
        if probe.shape[0] != env.num_envs:
            probe = probe.T
        self.dim = probe.shape[1]
        n = env.num_envs
        self.noise_purpose = f"obs.{group}.{name}"
        self.delay_ring = np.zeros((cfg.delay_steps + 1, n, self.dim))
        self.delay_head = 0
        self.history_ring = np.zeros((cfg.history, n, self.dim))  # oldest-first
        self.out_dim = self.dim * cfg.history


class ObservationManager:
    """Computes observation groups once per control step."""

    def __init__(self, groups: dict[str, ObsGroupCfg], env):
        self.env = env
        self.groups: dict[str, list[_ObsTerm]] = {}
        self.group_cfgs = groups
        self._pending_reset: dict[str, np.ndarray] = {}
        self._cache: dict[str, tuple[int, np.ndarray]] = {}
        self.nonfinite_report: dict[str, np.ndarray] = {}
        for group, cfg in groups.items():
            self.groups[group] = [
                _ObsTerm(group, name, term_cfg, env) for name, term_cfg in cfg.terms.items()
            ]
            self._pending_reset[group] = np.zeros(env.num_envs, dtype=bool)

    def group_dim(self, group: str) -> int:
        return sum(t.out_dim for t in self.groups[group])

    def mark_reset(self, ids: np.ndarray) -> None:
        for mask in self._pending_reset.values():
            mask[ids] = True
        self._cache.clear()

    def _processed(self, term: _ObsTerm, enable_noise: bool) -> np.ndarray:
        env = self.env
        raw = np.atleast_2d(np.asarray(term.func(env, **term.cfg.params), dtype=np.float64))
        if raw.shape[0] != env.num_envs:
            raw = raw.T
        bad = ~np.isfinite(raw).all(axis=1)
        if bad.any():
            self.nonfinite_report[term.name] = bad
        value = raw
        if term.cfg.clip is not None:
            value = np.clip(value, term.cfg.clip[0], term.cfg.clip[1])
        if term.cfg.scale is not None:
            value = value * term.cfg.scale
        noise = term.cfg.noise
        if enable_noise and noise.kind != "none" and noise.scale:
            if noise.kind == "uniform":
                value = value + env.streams.uniform(
                    term.noise_purpose, -noise.scale, noise.scale, None, term.dim
                )
            elif noise.kind == "gaussian":
                value = value + env.streams.normal(
                    term.noise_purpose, noise.scale, None, term.dim
                )
            else:
                raise ManagerError(f"unknown noise kind {noise.kind!r}")
        return value

    def compute(self, group: str) -> np.ndarray:
        """Group output (N, sum of term dims * history), cached per step."""
        if group not in self.groups:
            raise ManagerError(f"unknown observation group {group!r}; have {list(self.groups)}")
        step = self.env.global_step
        cached = self._cache.get(group)
        if cached is not None and cached[0] == step:
            return cached[1]
        pending = self._pending_reset[group]
        reset_ids = np.flatnonzero(pending)
        enable_noise = self.group_cfgs[group].enable_noise
        pieces = []
        for term in self.groups[group]:
            value = self._processed(term, enable_noise)
            if term.cfg.delay_steps == 0 and term.cfg.history == 1:
                pieces.append(value)  # rings are identity here
                continue
            # delay ring: push, then read delay_steps back
            term.delay_head = (term.delay_head + 1) % term.delay_ring.shape[0]
            term.delay_ring[term.delay_head] = value
            if reset_ids.size:
                term.delay_ring[:, reset_ids, :] = value[reset_ids]
            slot = (term.delay_head - term.cfg.delay_steps) % term.delay_ring.shape[0]
            delayed = term.delay_ring[slot]
            # history ring: shift oldest out, append the delayed value
            term.history_ring[:-1] = term.history_ring[1:]
            term.history_ring[-1] = delayed
            if reset_ids.size:
                term.history_ring[:, reset_ids, :] = delayed[reset_ids]
            pieces.append(
                term.history_ring.transpose(1, 0, 2).reshape(self.env.num_envs, term.out_dim)
            )
        # single-term groups must not hand out a live view of term state
        out = pieces[0].copy() if len(pieces) == 1 else np.concatenate(pieces, axis=1)
        pending[:] = False
        self._cache[group] = (step, out)
        return out

    def compute_all(self) -> dict[str, np.ndarray]:
        self.nonfinite_report = {}
        return {group: self.compute(group) for group in self.groups}

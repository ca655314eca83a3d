"""Action manager: split the policy tensor and drive the actuator stacks."""

from __future__ import annotations

import numpy as np

from ..actuators import Actuator
from .base import ActionTermCfg, ManagerError


class _ActionTerm:
    def __init__(self, name: str, cfg: ActionTermCfg, env, start: int):
        self.name = name
        self.cfg = cfg
        self.joint_ids = np.array(env.robot.find_joints(cfg.joint_patterns), dtype=np.int64)
        self.dim = len(self.joint_ids)
        self.slice = slice(start, start + self.dim)
        if cfg.offset_mode == "default":
            defaults = np.asarray(env.robot.default_state.joint_pos or np.zeros(env.model.num_joints))
            self.offset = defaults[self.joint_ids]
        elif cfg.offset_mode == "zero":
            self.offset = np.zeros(self.dim)
        else:
            raise ManagerError(f"action term {name!r}: unknown offset_mode {cfg.offset_mode!r}")
        self.actuators = []
        for act_name, act_cfg in cfg.actuators.items():
            patterns = act_cfg.joint_patterns
            if act_cfg.kind == "delayed" and not patterns:
                patterns = act_cfg.inner.joint_patterns
            ids = np.array(env.robot.find_joints(patterns), dtype=np.int64)
            extra = set(ids) - set(self.joint_ids.tolist())
            if extra:
                raise ManagerError(
                    f"actuator {act_name!r} drives joints {sorted(extra)} outside "
                    f"action term {name!r}"
                )
            self.actuators.append(
                Actuator(f"{name}.{act_name}", act_cfg, env.model, ids, env.streams)
            )


class ActionManager:
    """Owns action history, per-term slicing and per-substep torque writes."""

    def __init__(self, cfg: dict[str, ActionTermCfg], env):
        self.env = env
        self.terms: dict[str, _ActionTerm] = {}
        start = 0
        for name, term_cfg in cfg.items():
            term = _ActionTerm(name, term_cfg, env, start)
            self.terms[name] = term
            start += term.dim
        self.total_dim = start
        driven: set[int] = set()
        for term in self.terms.values():
            for act in term.actuators:
                overlap = driven & set(act.joint_ids.tolist())
                if overlap:
                    raise ManagerError(f"joints {sorted(overlap)} driven by two actuators")
                driven |= set(act.joint_ids.tolist())
        n = env.model.n_worlds
        self.action = np.zeros((n, self.total_dim))
        self.prev_action = np.zeros((n, self.total_dim))
        self.targets = np.zeros((n, env.model.num_joints))
        for term in self.terms.values():
            self.targets[:, term.joint_ids] = term.offset

    def process(self, actions: np.ndarray) -> None:
        """Stage 1: history update, optional clip, per-term target slices."""
        actions = np.asarray(actions, dtype=np.float64)
        if actions.shape != self.action.shape:
            raise ManagerError(
                f"action shape {actions.shape} does not match expected "
                f"{self.action.shape} (sum of term dims)"
            )
        self.prev_action[...] = self.action
        self.action[...] = actions
        for term in self.terms.values():
            sliced = actions[:, term.slice]
            if term.cfg.clip is not None:
                sliced = np.clip(sliced, term.cfg.clip[0], term.cfg.clip[1])
            self.targets[:, term.joint_ids] = term.offset + term.cfg.scale * sliced

    def apply(self) -> None:
        """Stage 2, every substep: targets -> actuator stacks -> ctrl."""
        state = self.env.state
        q, qd = state.q[:, 3:], state.qd[:, 3:]
        for term in self.terms.values():
            for act in term.actuators:
                state.ctrl[:, act.joint_ids] = act.compute(self.targets, q, qd)

    def reset(self, ids: np.ndarray) -> None:
        self.action[ids] = 0.0
        self.prev_action[ids] = 0.0
        for term in self.terms.values():
            self.targets[np.ix_(ids, term.joint_ids)] = term.offset
            for act in term.actuators:
                act.reset(ids, self.targets)

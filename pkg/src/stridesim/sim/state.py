"""Structure-of-arrays simulation state for N worlds stepped in lockstep."""

from __future__ import annotations

import numpy as np

from .model import Model


class ContactCache:
    """Per-foot contact quantities as applied during the last substep."""

    def __init__(self, n_worlds: int, n_feet: int):
        self.normal_force = np.zeros((n_worlds, n_feet))
        self.tangent_force = np.zeros((n_worlds, n_feet))
        self.foot_pos = np.zeros((n_worlds, n_feet, 2))
        self.foot_vel = np.zeros((n_worlds, n_feet, 2))
        self.in_contact = np.zeros((n_worlds, n_feet), dtype=bool)


class BatchState:
    """q, qd, ctrl and bookkeeping, all with a leading world dimension.

    q columns: [base x, base z, base pitch, joint angles...]. ``ext_force`` is
    an (N, 2) world-frame push on the base consumed by exactly one substep.
    """

    def __init__(self, model: Model):
        n, nq, k = model.n_worlds, model.nq, model.num_joints
        self.n_worlds = n
        self.nq = nq
        self.q = np.zeros((n, nq))
        self.qd = np.zeros((n, nq))
        self.ctrl = np.zeros((n, k))
        self.ext_force = np.zeros((n, 2))
        self.sim_step = 0
        self.time = np.zeros(n)
        self.contact = ContactCache(n, len(model.feet))


class StateFrame:
    """Deep copy of the replayable portion of a BatchState."""

    __slots__ = ("q", "qd", "ctrl", "sim_step")

    def __init__(self, q: np.ndarray, qd: np.ndarray, ctrl: np.ndarray, sim_step: int):
        self.q = q
        self.qd = qd
        self.ctrl = ctrl
        self.sim_step = sim_step


def snapshot(state: BatchState) -> StateFrame:
    return StateFrame(state.q.copy(), state.qd.copy(), state.ctrl.copy(), state.sim_step)


def restore(state: BatchState, frame: StateFrame) -> None:
    if frame.q.shape != state.q.shape or frame.ctrl.shape != state.ctrl.shape:
        raise ValueError(
            f"frame shape {frame.q.shape}/{frame.ctrl.shape} does not match "
            f"state {state.q.shape}/{state.ctrl.shape}"
        )
    state.q[...] = frame.q
    state.qd[...] = frame.qd
    state.ctrl[...] = frame.ctrl
    state.sim_step = frame.sim_step


def detect_nonfinite(state: BatchState) -> np.ndarray:
    """Per-world flag: any NaN/Inf in q, qd or ctrl."""
    bad = ~np.isfinite(state.q).all(axis=1)
    bad |= ~np.isfinite(state.qd).all(axis=1)
    bad |= ~np.isfinite(state.ctrl).all(axis=1)
    return bad

"""Deterministic rollout policies for smoke runs and benchmarks."""

from __future__ import annotations

import numpy as np

from .env import ManagerBasedRlEnv


def zero_policy(env: ManagerBasedRlEnv, step: int) -> np.ndarray:
    return np.zeros((env.num_envs, env.action_manager.total_dim))


def random_policy(env: ManagerBasedRlEnv, step: int) -> np.ndarray:
    """Uniform [-1, 1) actions from the per-world streams (reproducible)."""
    return env.streams.uniform("policy.random", -1.0, 1.0, None, env.action_manager.total_dim)


def scripted_sine_policy(
    env: ManagerBasedRlEnv, step: int, amplitude: float = 0.6, frequency_hz: float = 1.5
) -> np.ndarray:
    """Per-joint phase-shifted sinusoids; a deterministic actuator workout."""
    dim = env.action_manager.total_dim
    t = step * env.dt_control
    phases = np.arange(dim) * (np.pi / max(1, dim - 1))
    wave = amplitude * np.sin(2.0 * np.pi * frequency_hz * t + phases)
    return np.broadcast_to(wave, (env.num_envs, dim)).copy()


POLICIES = {
    "zero": zero_policy,
    "random": random_policy,
    "scripted-sine": scripted_sine_policy,
}

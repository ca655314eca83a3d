"""Task registry: id -> EnvCfg builder."""

from __future__ import annotations

from typing import Callable

from ..env import EnvCfg
from .velocity import velocity_env_cfg

TASKS: dict[str, Callable[..., EnvCfg]] = {
    "Velocity-Flat": lambda **kw: velocity_env_cfg(rough=False, **kw),
    "Velocity-Rough": lambda **kw: velocity_env_cfg(rough=True, **kw),
}


class TaskError(KeyError):
    pass


def make_env_cfg(task_id: str, **kwargs) -> EnvCfg:
    if task_id not in TASKS:
        raise TaskError(f"unknown task {task_id!r}; registered: {', '.join(sorted(TASKS))}")
    return TASKS[task_id](**kwargs)

"""Term configs and function registries shared by the seven managers.

A term is a named unit of MDP logic: a registered function plus a typed
config record. Managers own ordered string-keyed maps of term configs;
everything downstream (observation layout, reward totals, metrics keys)
depends only on the registration order of those maps.

Term functions are plain functions registered by id. They receive the
environment as first argument (plus ``ids`` for event/curriculum terms) and
must be pure over (state, params, RNG stream) with no hidden cross-world
state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

from ..actuators import ActuatorCfg, IdealPdCfg

MAX_DELAY_STEPS = 64
MAX_HISTORY = 32


class ManagerError(ValueError):
    pass


OBSERVATION_TERMS: dict[str, Callable] = {}
REWARD_TERMS: dict[str, Callable] = {}
TERMINATION_TERMS: dict[str, Callable] = {}
EVENT_TERMS: dict[str, Callable] = {}
CURRICULUM_TERMS: dict[str, Callable] = {}


def _register(registry: dict[str, Callable], name: str):
    def deco(func: Callable) -> Callable:
        registry[name] = func
        return func

    return deco


def observation_term(name: str):
    return _register(OBSERVATION_TERMS, name)


def reward_term(name: str):
    return _register(REWARD_TERMS, name)


def termination_term(name: str):
    return _register(TERMINATION_TERMS, name)


def event_term(name: str):
    return _register(EVENT_TERMS, name)


def curriculum_term(name: str):
    return _register(CURRICULUM_TERMS, name)


def resolve(registry: dict[str, Callable], func_id: str, what: str) -> Callable:
    if func_id not in registry:
        raise ManagerError(
            f"unknown {what} term function {func_id!r}; registered: "
            f"{', '.join(sorted(registry)) or 'none'}"
        )
    return registry[func_id]


# ---------------------------------------------------------------------------
# term configs


@dataclass
class ActionTermCfg:
    joint_patterns: list[str] = field(default_factory=lambda: [".*"])
    actuators: dict[str, ActuatorCfg] = field(default_factory=lambda: {"main": IdealPdCfg()})
    scale: float = 0.5
    offset_mode: str = "default"  # targets = offset + scale * action; "default" | "zero"
    clip: tuple[float, float] | None = None


@dataclass
class NoiseCfg:
    kind: str = "none"  # "none" | "uniform" (+-scale) | "gaussian" (std=scale)
    scale: float = 0.0


@dataclass
class ObsTermCfg:
    func: str = ""
    clip: tuple[float, float] | None = None
    scale: float | None = None
    noise: NoiseCfg = field(default_factory=NoiseCfg)
    delay_steps: int = 0  # control steps
    history: int = 1
    params: dict[str, Any] = field(default_factory=dict)


@dataclass
class ObsGroupCfg:
    terms: dict[str, ObsTermCfg] = field(default_factory=dict)
    enable_noise: bool = True


@dataclass
class RewardTermCfg:
    func: str = ""
    weight: float = 1.0
    params: dict[str, Any] = field(default_factory=dict)


@dataclass
class TerminationTermCfg:
    func: str = ""
    time_out: bool = False  # True -> truncation, False -> failure
    params: dict[str, Any] = field(default_factory=dict)


@dataclass
class EventTermCfg:
    func: str = ""
    mode: str = "reset"  # "startup" | "reset" | "interval"
    interval_range: tuple[float, float] | None = None  # seconds, interval mode
    params: dict[str, Any] = field(default_factory=dict)


@dataclass
class CurriculumTermCfg:
    func: str = ""
    params: dict[str, Any] = field(default_factory=dict)


@dataclass
class CommandCfg:
    ranges: dict[str, tuple[float, float]] = field(
        default_factory=lambda: {"vx": (-1.0, 1.0), "pitch_rate": (0.0, 0.0)}
    )
    resample_period: float = 10.0
    # widening cap: |range| may grow to at most cap_scale * initial
    cap_scale: float = 2.0

from .action import ActionManager
from .base import (
    ActionTermCfg,
    CommandCfg,
    CurriculumTermCfg,
    EventTermCfg,
    ManagerError,
    NoiseCfg,
    ObsGroupCfg,
    ObsTermCfg,
    RewardTermCfg,
    TerminationTermCfg,
    curriculum_term,
    event_term,
    observation_term,
    reward_term,
    termination_term,
)
from .command import CommandManager
from .curriculum import CurriculumManager
from .event import EventManager, randomize_field
from .observation import ObservationManager
from .reward import RewardManager
from .termination import TerminationManager

__all__ = [
    "ActionManager",
    "ActionTermCfg",
    "CommandCfg",
    "CommandManager",
    "CurriculumManager",
    "CurriculumTermCfg",
    "EventManager",
    "EventTermCfg",
    "ManagerError",
    "NoiseCfg",
    "ObsGroupCfg",
    "ObsTermCfg",
    "ObservationManager",
    "RewardManager",
    "RewardTermCfg",
    "TerminationManager",
    "TerminationTermCfg",
    "curriculum_term",
    "event_term",
    "observation_term",
    "randomize_field",
    "reward_term",
    "termination_term",
]

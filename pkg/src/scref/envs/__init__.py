"""Toy kinematic manipulation environments, scripted experts, demo recording."""

from .core import (
    ACTION_CENTER,
    ACTION_HALF,
    ACTION_HIGH,
    ACTION_LOW,
    GRASP_RADIUS,
    OBS_DIM,
    POS_STEP,
    YAW_STEP,
    EnvError,
    ObjectState,
    StepResult,
    ToyEnv,
    WorldState,
    clamp_action,
)
from .demos import DemoEpisode, DemoFileError, load_demos, record_demos, write_demo_file
from .expert import expert_action, noisy_expert_action
from .tasks import TASKS, Task, TaskSpec, get_task

__all__ = [
    "ACTION_CENTER", "ACTION_HALF", "ACTION_HIGH", "ACTION_LOW", "GRASP_RADIUS",
    "OBS_DIM", "POS_STEP", "YAW_STEP", "EnvError", "ObjectState", "StepResult",
    "ToyEnv", "WorldState", "clamp_action", "DemoEpisode", "DemoFileError",
    "load_demos", "record_demos", "write_demo_file", "expert_action",
    "noisy_expert_action", "TASKS", "Task", "TaskSpec", "get_task",
]

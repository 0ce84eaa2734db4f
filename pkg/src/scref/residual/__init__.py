"""Residual refinement stage: SAC-trained corrections on a frozen base policy."""

from .compose import RESIDUAL_OBS_DIM, build_residual_obs, compose_action, split_residual_obs
from .networks import QCritic, ResidualActor, copy_params, polyak_update
from .refine import RefineConfig, RefineResult, run_refinement
from .replay import Batch, ReplayBuffer, Transition
from .sac import SACConfig, SACState, actor_update, critic_update, sample_residual, update_burst
from .schedule import StageSchedule

__all__ = [
    "RESIDUAL_OBS_DIM", "build_residual_obs", "compose_action", "split_residual_obs",
    "QCritic", "ResidualActor", "copy_params", "polyak_update",
    "RefineConfig", "RefineResult", "run_refinement",
    "Batch", "ReplayBuffer", "Transition",
    "SACConfig", "SACState", "actor_update", "critic_update", "sample_residual", "update_burst",
    "StageSchedule",
]

"""Observation augmentation and residual action composition."""

from __future__ import annotations

import numpy as np

from ..envs.core import ACTION_HALF, ACTION_HIGH, ACTION_LOW
from ..flow_policy import Lookahead
from ..geometry import EEPose

RESIDUAL_OBS_DIM = 15  # pose 7 + predicted progress 1 + predicted increment 7


def build_residual_obs(ee: EEPose, look: Lookahead) -> np.ndarray:
    """Augmented observation (pose 7, predicted progress 1, predicted increment 7)."""
    out = np.concatenate([ee.as_vector(), [look.progress], look.delta.as_vector()])
    if out.shape != (RESIDUAL_OBS_DIM,):
        raise ValueError(f"augmented observation has shape {out.shape}")
    return out


def split_residual_obs(o_w: np.ndarray) -> tuple[np.ndarray, float, np.ndarray]:
    """Inverse of build_residual_obs: (pose 7-vector, progress, increment 7-vector)."""
    o_w = np.asarray(o_w, dtype=np.float64).reshape(RESIDUAL_OBS_DIM)
    return o_w[:7], float(o_w[7]), o_w[8:]


def compose_action(a_base_substep: np.ndarray, a_res: np.ndarray, lam: float) -> np.ndarray:
    """Base action plus scaled residual, clamped to environment bounds.

    a_res lives in (-1, 1)^5 and is scaled by the per-axis half-range, so lam
    is the residual magnitude as a fraction of the actuation range. lam == 0
    returns the base action bitwise (no clamp applied).
    """
    a_base_substep = np.asarray(a_base_substep, dtype=np.float64)
    if lam == 0.0:
        return a_base_substep.copy()
    composed = a_base_substep + lam * np.asarray(a_res, dtype=np.float64) * ACTION_HALF
    return np.clip(composed, ACTION_LOW, ACTION_HIGH)

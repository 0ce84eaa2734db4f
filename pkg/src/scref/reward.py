"""Dense reward derived from the base policy's own predictions.

A short-term goal position is built from the predicted local-frame motion,
the realized end-effector displacement is scored by cosine alignment against
it, and the final reward blends that guidance with the sparse environment
reward under a progress-dependent decay.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import DeltaState


@dataclass
class RewardConfig:
    w_guide: float = 0.6
    c: float = 0.01  # per-step time penalty, charged once per composed reward
    eps: float = 1e-13  # additive cosine-denominator guard; small enough to stay
    # within 1e-6 of the ideal cosine whenever both displacement norms exceed 1e-3
    eta_mode: str = "linear"  # "linear" decays with progress, "fixed" stays at 1
    goal_frame: str = "local"  # "local" rotates the predicted motion into world frame

    def __post_init__(self):
        if self.w_guide < 0 or self.c < 0 or self.eps <= 0:
            raise ValueError("w_guide and c must be >= 0, eps > 0")
        if self.eta_mode not in ("linear", "fixed"):
            raise ValueError(f"unknown eta_mode {self.eta_mode!r}")
        if self.goal_frame not in ("local", "literal"):
            raise ValueError(f"unknown goal_frame {self.goal_frame!r}")


@dataclass(frozen=True)
class GuidanceContext:
    """Inputs fixed at base-query time: start position, goal, executed step count."""

    p_start: np.ndarray
    p_goal: np.ndarray
    n_steps: int
    eps: float = 1e-13

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.eps <= 0:
            raise ValueError("eps must be > 0")


def goal_position(p_t: np.ndarray, r_t: np.ndarray, delta_pred: DeltaState, frame: str = "local") -> np.ndarray:
    """Short-term goal: current position advanced by the predicted translation.

    The predicted increment lives in the local frame, so by default it is
    rotated through the current orientation; "literal" adds it unrotated.
    """
    p_t = np.asarray(p_t, dtype=np.float64)
    if frame == "local":
        return p_t + np.asarray(r_t) @ delta_pred.dpos
    if frame == "literal":
        return p_t + delta_pred.dpos
    raise ValueError(f"unknown goal frame {frame!r}")


def guidance_reward(ctx: GuidanceContext, p_after: np.ndarray) -> float:
    """Cosine alignment between realized and predicted displacement, in [-1, 1].

    The eps guard keeps degenerate zero displacements at ~0 instead of
    dividing by zero; it can only shrink the magnitude.
    """
    u = np.asarray(p_after, dtype=np.float64) - ctx.p_start
    v = ctx.p_goal - ctx.p_start
    denom = float(np.linalg.norm(u) * np.linalg.norm(v)) + ctx.eps
    # elementwise product + sum (not BLAS dot): keeps orthogonal pairs at exactly 0
    return float((u * v).sum() / denom)


def eta(progress: float, mode: str = "linear") -> float:
    """Guidance decay: 1 at progress 0 falling linearly to 0, or constant 1."""
    if mode == "fixed":
        return 1.0
    if mode == "linear":
        return float(min(1.0, max(0.0, 1.0 - progress)))
    raise ValueError(f"unknown eta_mode {mode!r}")


def final_reward(cfg: RewardConfig, progress_pred: float, r_guide: float, r_env: float) -> float:
    """eta(progress) * w_guide * r_guide + r_env - c."""
    p = min(1.0, max(0.0, float(progress_pred)))
    return eta(p, cfg.eta_mode) * cfg.w_guide * float(r_guide) + float(r_env) - cfg.c

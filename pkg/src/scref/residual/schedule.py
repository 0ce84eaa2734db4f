"""Residual-weight schedule: hold at zero, ramp linearly, then stay constant."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class StageSchedule:
    t_collect: int  # macro-steps acting purely with the base policy
    t_ramp: int  # macro-steps of linear injection up to the target
    lambda_target: float
    lambda_eval: float

    def __post_init__(self):
        if self.t_collect < 0 or self.t_ramp < 0:
            raise ValueError("phase lengths must be non-negative")
        if self.lambda_target < 0 or self.lambda_eval < 0:
            raise ValueError("residual scales must be non-negative")

    def lambda_at(self, t: int) -> float:
        """Training-time residual scale at macro-step t (0-indexed)."""
        if t < self.t_collect:
            return 0.0
        if self.t_ramp <= 0:
            return self.lambda_target
        frac = (t - self.t_collect) / self.t_ramp
        return self.lambda_target * min(1.0, frac)

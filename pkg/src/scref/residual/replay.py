"""Flat-array ring replay buffer for the refinement stage."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Transition:
    """One macro-step tuple: augmented obs, executed base sub-chunk (normalized,
    flattened), residual action, next-step counterparts, composed reward, done."""

    o_w: np.ndarray
    base_feat: np.ndarray
    a_res: np.ndarray
    o_w_next: np.ndarray
    base_feat_next: np.ndarray
    r_final: float
    done: bool


@dataclass
class Batch:
    o_w: np.ndarray
    base_feat: np.ndarray
    a_res: np.ndarray
    o_w_next: np.ndarray
    base_feat_next: np.ndarray
    r_final: np.ndarray  # (B, 1)
    done: np.ndarray  # (B, 1)

    def __len__(self):
        return len(self.r_final)


class ReplayBuffer:
    """FIFO ring storage; batches sample uniformly without replacement."""

    def __init__(self, capacity: int, obs_dim: int, base_feat_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.o_w = np.zeros((capacity, obs_dim))
        self.base_feat = np.zeros((capacity, base_feat_dim))
        self.a_res = np.zeros((capacity, action_dim))
        self.o_w_next = np.zeros((capacity, obs_dim))
        self.base_feat_next = np.zeros((capacity, base_feat_dim))
        self.r_final = np.zeros((capacity, 1))
        self.done = np.zeros((capacity, 1))
        self.pos = 0
        self.size = 0

    def push(self, tr: Transition) -> None:
        if not np.isfinite(tr.r_final):
            raise ValueError("non-finite reward in transition")
        i = self.pos % self.capacity
        self.o_w[i] = tr.o_w
        self.base_feat[i] = tr.base_feat
        self.a_res[i] = tr.a_res
        self.o_w_next[i] = tr.o_w_next
        self.base_feat_next[i] = tr.base_feat_next
        self.r_final[i] = tr.r_final
        self.done[i] = float(tr.done)
        self.pos += 1
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, batch: int) -> Batch:
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        take = min(batch, self.size)
        idx = rng.choice(self.size, size=take, replace=False)
        return Batch(
            self.o_w[idx].copy(),
            self.base_feat[idx].copy(),
            self.a_res[idx].copy(),
            self.o_w_next[idx].copy(),
            self.base_feat_next[idx].copy(),
            self.r_final[idx].copy(),
            self.done[idx].copy(),
        )

    def row(self, i: int) -> Transition:
        """Decode one stored slot (oldest-first indexing when full)."""
        if not (0 <= i < self.size):
            raise IndexError("row out of range")
        j = (self.pos + i) % self.capacity if self.size == self.capacity else i
        return Transition(
            self.o_w[j].copy(),
            self.base_feat[j].copy(),
            self.a_res[j].copy(),
            self.o_w_next[j].copy(),
            self.base_feat_next[j].copy(),
            float(self.r_final[j, 0]),
            bool(self.done[j, 0]),
        )

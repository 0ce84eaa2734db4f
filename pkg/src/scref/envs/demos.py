"""Demonstration recording and the line-delimited demo file format.

File layout: first line is a JSON header (format tag, task, horizon, action
bounds, Euler convention, episode count, seeds); each following line is one
successful episode with obs/action/pose arrays. Floats survive the JSON round
trip bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..geometry import EULER_CONVENTION, EEPose
from ..seeding import derive_rng, derive_seed
from .core import OBS_DIM, POS_STEP, YAW_STEP, ToyEnv, clamp_action
from .expert import noisy_expert_action
from .tasks import Task, get_task

FORMAT_TAG = "scref-demos"
VERSION = 1


class DemoFileError(IOError):
    pass


@dataclass
class DemoEpisode:
    seed: int
    obs: np.ndarray  # (L, obs_dim), pre-action observation vectors
    actions: np.ndarray  # (L, 5) executed (clamped) actions; last row repeats
    pose_vecs: np.ndarray  # (L, 7) ee pose vectors matching obs rows

    @property
    def poses(self) -> list[EEPose]:
        return [EEPose.from_vector(v) for v in self.pose_vecs]

    def __len__(self):
        return len(self.actions)


def record_episode(env: ToyEnv, task: Task, seed: int, noise_rng, noise_frac: float) -> DemoEpisode | None:
    """Roll the noisy expert once; returns the episode only on success.

    The terminal observation is appended with the final action repeated, so
    trajectories have T+1 rows for T executed steps.
    """
    obs = env.reset(seed)
    rows_obs, rows_act, rows_pose = [], [], []
    success = False
    for _ in range(env.max_steps):
        action = clamp_action(noisy_expert_action(env.state, task, noise_rng, noise_frac))
        rows_obs.append(obs.vector())
        rows_act.append(action)
        rows_pose.append(obs.ee.as_vector())
        result = env.step(action)
        obs = result.obs
        if result.terminated:
            success = result.success
            break
    if not success:
        return None
    rows_obs.append(obs.vector())
    rows_act.append(rows_act[-1].copy())
    rows_pose.append(obs.ee.as_vector())
    return DemoEpisode(seed, np.stack(rows_obs), np.stack(rows_act), np.stack(rows_pose))


def record_demos(task_id: str, count: int, seed: int, noise_frac: float = 0.1) -> list[DemoEpisode]:
    """Collect `count` successful noisy-expert episodes, deterministically from seed."""
    task = get_task(task_id)
    env = ToyEnv(task)
    episodes: list[DemoEpisode] = []
    attempt = 0
    failures = 0
    while len(episodes) < count:
        if attempt > 3 * count + 100:
            raise RuntimeError(f"expert failed too often on {task_id}: {failures} failures in {attempt} attempts")
        ep_seed = derive_seed(seed, "demo-episode", attempt)
        noise_rng = derive_rng(seed, "demo-noise", attempt)
        episode = record_episode(env, task, ep_seed, noise_rng, noise_frac)
        attempt += 1
        if episode is None:
            failures += 1
        else:
            episodes.append(episode)
    return episodes


def write_demo_file(path, task_id: str, episodes: list[DemoEpisode], seed: int, horizon: int, noise_frac: float) -> None:
    header = {
        "format": FORMAT_TAG,
        "version": VERSION,
        "task_id": task_id,
        "count": len(episodes),
        "seed": seed,
        "horizon": horizon,
        "noise_frac": noise_frac,
        "euler_convention": EULER_CONVENTION,
        "pos_step": POS_STEP,
        "yaw_step": YAW_STEP,
        "obs_dim": OBS_DIM,
    }
    lines = [json.dumps(header)]
    for ep in episodes:
        lines.append(
            json.dumps(
                {
                    "seed": ep.seed,
                    "obs": ep.obs.tolist(),
                    "actions": ep.actions.tolist(),
                    "poses": ep.pose_vecs.tolist(),
                }
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


_HEADER_KEYS = {
    "format", "version", "task_id", "count", "seed", "horizon",
    "noise_frac", "euler_convention", "pos_step", "yaw_step", "obs_dim",
}


def load_demos(path) -> tuple[dict, list[DemoEpisode]]:
    """Parse and validate a demo file; raises DemoFileError without partial results."""
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DemoFileError("empty demo file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise DemoFileError(f"unreadable header: {e}") from e
    if not isinstance(header, dict) or header.get("format") != FORMAT_TAG:
        raise DemoFileError("missing demo format tag in header")
    if header.get("version") != VERSION:
        raise DemoFileError(f"unsupported demo file version {header.get('version')!r}")
    missing = _HEADER_KEYS - set(header)
    if missing:
        raise DemoFileError(f"header missing keys {sorted(missing)}")
    if header["euler_convention"] != EULER_CONVENTION:
        raise DemoFileError(f"demo file uses euler convention {header['euler_convention']!r}")
    episodes = []
    for i, line in enumerate(lines[1:]):
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise DemoFileError(f"unreadable episode {i}: {e}") from e
        obs = np.asarray(rec["obs"], dtype=np.float64)
        actions = np.asarray(rec["actions"], dtype=np.float64)
        poses = np.asarray(rec["poses"], dtype=np.float64)
        if not (len(obs) == len(actions) == len(poses)) or len(obs) < 2:
            raise DemoFileError(f"episode {i} has inconsistent lengths")
        if obs.shape[1] != header["obs_dim"] or actions.shape[1] != 5 or poses.shape[1] != 7:
            raise DemoFileError(f"episode {i} has wrong array widths")
        if not (np.isfinite(obs).all() and np.isfinite(actions).all() and np.isfinite(poses).all()):
            raise DemoFileError(f"episode {i} contains non-finite values")
        episodes.append(DemoEpisode(int(rec["seed"]), obs, actions, poses))
    if len(episodes) != header["count"]:
        raise DemoFileError(f"header promises {header['count']} episodes, file has {len(episodes)}")
    return header, episodes

"""Deterministic kinematic tabletop world shared by all toy tasks.

Quasi-static rules instead of contact dynamics: the end effector is a free
point with yaw, grasping snaps an object rigidly to it, released objects drop
straight to their support height, and the push task sweeps the cube ahead of
the end effector. All randomness comes from the reset seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..flow_policy import Observation
from ..geometry import EEPose, rot_z

# action bounds: |dpos| <= 0.02 m per axis, |dyaw| <= 0.1 rad, gripper in [0, 1]
POS_STEP = 0.02
YAW_STEP = 0.1
ACTION_LOW = np.array([-POS_STEP, -POS_STEP, -POS_STEP, -YAW_STEP, 0.0])
ACTION_HIGH = np.array([POS_STEP, POS_STEP, POS_STEP, YAW_STEP, 1.0])
ACTION_CENTER = (ACTION_LOW + ACTION_HIGH) / 2.0
ACTION_HALF = (ACTION_HIGH - ACTION_LOW) / 2.0

WORKSPACE_LOW = np.array([-0.25, -0.25, 0.0])
WORKSPACE_HIGH = np.array([0.25, 0.25, 0.30])

GRASP_RADIUS = 0.02
OBS_DIM = 15  # ee pose 7 + object features 8

SHAPES = ("cube", "sphere", "peg", "hole-block")


class EnvError(RuntimeError):
    pass


def clamp_action(action: np.ndarray) -> np.ndarray:
    action = np.asarray(action, dtype=np.float64).reshape(5)
    if not np.isfinite(action).all():
        raise EnvError("non-finite action")
    return np.clip(action, ACTION_LOW, ACTION_HIGH)


@dataclass
class ObjectState:
    obj_id: str
    shape: str
    position: np.ndarray
    yaw: float
    half_extent: np.ndarray  # (rx, ry, half height); spheres use radius in all slots
    grasp_opening: float = 0.4  # normalized gripper opening pinned while held
    grasped: bool = False
    hold_pos: np.ndarray | None = None  # object center in ee local frame while held
    hold_yaw: float = 0.0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise EnvError(f"unknown shape {self.shape!r}")
        self.position = np.asarray(self.position, dtype=np.float64).reshape(3).copy()
        self.half_extent = np.asarray(self.half_extent, dtype=np.float64).reshape(3).copy()

    def pose(self, gripper: float = 0.0) -> EEPose:
        return EEPose(self.position.copy(), rot_z(self.yaw), gripper)


@dataclass
class WorldState:
    ee_pos: np.ndarray
    ee_yaw: float
    ee_grip: float
    objects: list[ObjectState] = field(default_factory=list)
    goal_xy: np.ndarray | None = None  # toy-push target marker
    step_count: int = 0
    done: bool = False

    def ee_pose(self) -> EEPose:
        return EEPose(self.ee_pos.copy(), rot_z(self.ee_yaw), self.ee_grip)

    def obj(self, obj_id: str) -> ObjectState:
        for o in self.objects:
            if o.obj_id == obj_id:
                return o
        raise EnvError(f"no object {obj_id!r}")

    def grasped_object(self) -> ObjectState | None:
        held = [o for o in self.objects if o.grasped]
        if len(held) > 1:
            raise EnvError("more than one object grasped")
        return held[0] if held else None


@dataclass
class StepResult:
    obs: Observation
    r_env: float
    success: bool
    terminated: bool
    ee_position: np.ndarray


class ToyEnv:
    """One task instance; create one env per worker, nothing is shared."""

    def __init__(self, task):
        self.task = task
        self.state: WorldState | None = None

    @property
    def max_steps(self) -> int:
        return self.task.spec.max_steps

    def reset(self, seed: int) -> Observation:
        rng = np.random.default_rng(seed)
        self.state = self.task.sample_initial(rng)
        self.state.step_count = 0
        self.state.done = False
        return self.observation()

    def observation(self) -> Observation:
        st = self._require_state()
        feats = self.task.object_features(st)
        return Observation(ee=st.ee_pose(), object_features=feats, task_id=self.task.spec.index)

    def step(self, action: np.ndarray) -> StepResult:
        st = self._require_state()
        if st.done:
            raise EnvError("episode finished; call reset")
        a = clamp_action(action)

        st.ee_pos = st.ee_pos + rot_z(st.ee_yaw) @ a[:3]
        st.ee_pos = np.clip(st.ee_pos, WORKSPACE_LOW, WORKSPACE_HIGH)
        st.ee_yaw = float(np.mod(st.ee_yaw + a[3] + np.pi, 2 * np.pi) - np.pi)

        held = st.grasped_object()
        if held is not None:
            self._carry(st, held)

        cmd = float(a[4])
        if held is not None and cmd >= 0.5:
            held.grasped = False
            held.hold_pos = None
            self.task.resolve_drop(st, held)
            st.ee_grip = cmd
        elif held is not None:
            pass  # opening stays pinned to the held object
        elif cmd < 0.5 and self.task.spec.allow_grasp:
            target = self._graspable(st)
            if target is not None:
                target.grasped = True
                rt = rot_z(st.ee_yaw).T
                target.hold_pos = rt @ (target.position - st.ee_pos)
                target.hold_yaw = target.yaw - st.ee_yaw
                st.ee_grip = target.grasp_opening
            else:
                st.ee_grip = cmd
        else:
            st.ee_grip = cmd

        self.task.post_step(st)
        st.step_count += 1

        success = self.task.success(st)
        terminated = success or st.step_count >= self.task.spec.max_steps
        st.done = terminated
        r = self.task.spec.success_reward if success else 0.0
        return StepResult(
            obs=self.observation(),
            r_env=r,
            success=success,
            terminated=terminated,
            ee_position=st.ee_pos.copy(),
        )

    def check_success(self) -> bool:
        return self.task.success(self._require_state())

    def _carry(self, st: WorldState, held: ObjectState) -> None:
        held.position = st.ee_pos + rot_z(st.ee_yaw) @ held.hold_pos
        held.yaw = st.ee_yaw + held.hold_yaw

    def _graspable(self, st: WorldState) -> ObjectState | None:
        best, best_d = None, GRASP_RADIUS
        for o in st.objects:
            if not self.task.can_grasp(o):
                continue
            d = float(np.linalg.norm(st.ee_pos - self.task.grasp_point(o)))
            if d <= best_d:
                best, best_d = o, d
        return best

    def _require_state(self) -> WorldState:
        if self.state is None:
            raise EnvError("env not reset")
        return self.state

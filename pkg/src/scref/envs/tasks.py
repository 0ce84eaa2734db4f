"""Task definitions: objects, samplers, success predicates, drop rules.

Sizes: cube edge 40 mm, sphere radius 15 mm, peg 80 x 10 mm. Success
tolerances are 5 mm (stack vertical / place), 8 mm lateral plus 20 mm along
the insertion axis (insert), and 25 mm = half edge + 5 mm horizontally for
stacking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import EnvError, ObjectState, WorldState

CUBE_HALF = 0.02
SPHERE_R = 0.015
PEG_HALF_LEN = 0.04
PEG_R = 0.005
BOWL_HALF = np.array([0.03, 0.03, 0.01])  # center sits at z = 0.01
BOWL_RECESS_R = 0.02
BOWL_FLOOR_Z = 0.01
HOLE_BLOCK_HALF = np.array([0.03, 0.03, 0.03])  # top face at z = 0.06
HOLE_R = 0.008
HOLE_FLOOR_Z = 0.01
PUSH_RADIUS = 0.025

SPAWN_LO, SPAWN_HI = -0.12, 0.12


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    index: int
    max_steps: int
    success_reward: float = 1.0
    allow_grasp: bool = True
    tolerances: dict = field(default_factory=dict)


def _sample_ee(rng: np.random.Generator) -> tuple[np.ndarray, float]:
    pos = np.array([rng.uniform(-0.06, 0.06), rng.uniform(-0.06, 0.06), rng.uniform(0.10, 0.14)])
    return pos, float(rng.uniform(-0.3, 0.3))


def _sample_separated(rng: np.random.Generator, min_sep: float, lo=SPAWN_LO, hi=SPAWN_HI):
    for _ in range(1000):
        a = rng.uniform(lo, hi, 2)
        b = rng.uniform(lo, hi, 2)
        if np.linalg.norm(a - b) >= min_sep:
            return a, b
    raise EnvError("rejection sampling failed to place objects")


def _feat(primary: ObjectState, secondary_pos: np.ndarray) -> np.ndarray:
    return np.concatenate(
        [primary.position, [1.0 if primary.grasped else 0.0], secondary_pos, [0.0]]
    )


class Task:
    """Stateless behavior bundle for one task id."""

    spec: TaskSpec

    def sample_initial(self, rng) -> WorldState:
        raise NotImplementedError

    def object_features(self, st: WorldState) -> np.ndarray:
        raise NotImplementedError

    def success(self, st: WorldState) -> bool:
        raise NotImplementedError

    def resolve_drop(self, st: WorldState, obj: ObjectState) -> None:
        pass

    def post_step(self, st: WorldState) -> None:
        pass

    def can_grasp(self, obj: ObjectState) -> bool:
        return False

    def grasp_point(self, obj: ObjectState) -> np.ndarray:
        return obj.position


class ToyStack(Task):
    """Grasp the red cube and stack it on the green one."""

    spec = TaskSpec(
        "toy-stack",
        0,
        max_steps=400,
        tolerances={"horiz": CUBE_HALF + 0.005, "vert_gap": 2 * CUBE_HALF, "vert_tol": 0.005},
    )

    def sample_initial(self, rng):
        a_xy, b_xy = _sample_separated(rng, 0.08)
        ee_pos, ee_yaw = _sample_ee(rng)
        objs = [
            ObjectState("cube_a", "cube", [*a_xy, CUBE_HALF], 0.0, [CUBE_HALF] * 3, grasp_opening=0.4),
            ObjectState("cube_b", "cube", [*b_xy, CUBE_HALF], 0.0, [CUBE_HALF] * 3),
        ]
        return WorldState(ee_pos, ee_yaw, 1.0, objs)

    def object_features(self, st):
        return _feat(st.obj("cube_a"), st.obj("cube_b").position)

    def can_grasp(self, obj):
        return obj.obj_id == "cube_a"

    def grasp_point(self, obj):
        return obj.position + np.array([0.0, 0.0, CUBE_HALF])

    def resolve_drop(self, st, obj):
        base = st.obj("cube_b")
        if np.linalg.norm(obj.position[:2] - base.position[:2]) <= self.spec.tolerances["horiz"]:
            obj.position[2] = base.position[2] + 2 * CUBE_HALF
        else:
            obj.position[2] = CUBE_HALF

    def success(self, st):
        a, b = st.obj("cube_a"), st.obj("cube_b")
        tol = self.spec.tolerances
        horiz = np.linalg.norm(a.position[:2] - b.position[:2])
        gap = a.position[2] - b.position[2]
        return horiz <= tol["horiz"] and abs(gap - tol["vert_gap"]) <= tol["vert_tol"] and not a.grasped


class ToyPlace(Task):
    """Grasp the sphere and set it into the bowl recess; the recess centers it."""

    spec = TaskSpec(
        "toy-place",
        1,
        max_steps=250,
        tolerances={"horiz": 0.005, "rest_z": BOWL_FLOOR_Z + SPHERE_R, "vert_tol": 0.005},
    )

    def sample_initial(self, rng):
        s_xy, b_xy = _sample_separated(rng, 0.08)
        ee_pos, ee_yaw = _sample_ee(rng)
        objs = [
            ObjectState("sphere", "sphere", [*s_xy, SPHERE_R], 0.0, [SPHERE_R] * 3, grasp_opening=0.3),
            ObjectState("bowl", "hole-block", [*b_xy, BOWL_HALF[2]], 0.0, BOWL_HALF),
        ]
        return WorldState(ee_pos, ee_yaw, 1.0, objs)

    def object_features(self, st):
        return _feat(st.obj("sphere"), st.obj("bowl").position)

    def can_grasp(self, obj):
        return obj.obj_id == "sphere"

    def resolve_drop(self, st, obj):
        bowl = st.obj("bowl")
        off = obj.position[:2] - bowl.position[:2]
        if np.linalg.norm(off) <= BOWL_RECESS_R:
            # the concave recess rolls the sphere to its center
            obj.position[:2] = bowl.position[:2]
            obj.position[2] = BOWL_FLOOR_Z + SPHERE_R
        elif np.max(np.abs(off)) <= BOWL_HALF[0]:
            obj.position[2] = 2 * BOWL_HALF[2] + SPHERE_R  # on the rim
        else:
            obj.position[2] = SPHERE_R

    def success(self, st):
        s, bowl = st.obj("sphere"), st.obj("bowl")
        tol = self.spec.tolerances
        horiz = np.linalg.norm(s.position[:2] - bowl.position[:2])
        resting = abs(s.position[2] - tol["rest_z"]) <= tol["vert_tol"]
        return horiz <= tol["horiz"] and resting and not s.grasped


class ToyInsert(Task):
    """Grasp the standing peg and sink its tip into the block's vertical hole."""

    spec = TaskSpec(
        "toy-insert",
        2,
        max_steps=400,
        tolerances={"lateral": HOLE_R, "axis": 0.02, "floor_z": HOLE_FLOOR_Z},
    )

    def sample_initial(self, rng):
        p_xy, b_xy = _sample_separated(rng, 0.09)
        ee_pos, ee_yaw = _sample_ee(rng)
        objs = [
            ObjectState("peg", "peg", [*p_xy, PEG_HALF_LEN], 0.0, [PEG_R, PEG_R, PEG_HALF_LEN], grasp_opening=0.1),
            ObjectState("block", "hole-block", [*b_xy, HOLE_BLOCK_HALF[2]], 0.0, HOLE_BLOCK_HALF),
        ]
        return WorldState(ee_pos, ee_yaw, 1.0, objs)

    def object_features(self, st):
        return _feat(st.obj("peg"), st.obj("block").position)

    def can_grasp(self, obj):
        return obj.obj_id == "peg"

    def grasp_point(self, obj):
        return obj.position + np.array([0.0, 0.0, PEG_HALF_LEN / 2])

    def _tip(self, peg: ObjectState) -> np.ndarray:
        return peg.position - np.array([0.0, 0.0, PEG_HALF_LEN])

    def resolve_drop(self, st, obj):
        block = st.obj("block")
        tip = self._tip(obj)
        off = np.abs(tip[:2] - block.position[:2])
        block_top = 2 * HOLE_BLOCK_HALF[2]
        if np.all(off <= HOLE_R) and tip[2] < block_top:
            return  # the hole holds the peg where it was released
        if np.max(np.abs(obj.position[:2] - block.position[:2])) <= HOLE_BLOCK_HALF[0]:
            obj.position[2] = block_top + PEG_HALF_LEN
        else:
            obj.position[2] = PEG_HALF_LEN

    def success(self, st):
        peg, block = st.obj("peg"), st.obj("block")
        tol = self.spec.tolerances
        tip = self._tip(peg)
        lateral = np.abs(tip[:2] - block.position[:2])
        return bool(np.all(lateral <= tol["lateral"]) and abs(tip[2] - tol["floor_z"]) <= tol["axis"])


class ToyPush(Task):
    """Sweep the cube to the goal marker; grasping is disabled."""

    spec = TaskSpec(
        "toy-push",
        3,
        max_steps=200,
        allow_grasp=False,
        tolerances={"horiz": 0.02},
    )

    def sample_initial(self, rng):
        cube_xy, goal_xy = _sample_separated(rng, 0.07, lo=-0.10, hi=0.10)
        ee_pos, ee_yaw = _sample_ee(rng)
        objs = [ObjectState("cube", "cube", [*cube_xy, CUBE_HALF], 0.0, [CUBE_HALF] * 3)]
        return WorldState(ee_pos, ee_yaw, 1.0, objs, goal_xy=np.asarray(goal_xy, dtype=np.float64))

    def object_features(self, st):
        cube = st.obj("cube")
        return np.concatenate([cube.position, [0.0], st.goal_xy, [0.0, 0.0]])

    def post_step(self, st):
        cube = st.obj("cube")
        if st.ee_pos[2] >= 2 * CUBE_HALF + 0.005:
            return
        off = cube.position[:2] - st.ee_pos[:2]
        d = float(np.linalg.norm(off))
        if d < PUSH_RADIUS:
            direction = off / d if d > 1e-12 else np.array([1.0, 0.0])
            cube.position[:2] = st.ee_pos[:2] + direction * PUSH_RADIUS

    def success(self, st):
        cube = st.obj("cube")
        return float(np.linalg.norm(cube.position[:2] - st.goal_xy)) <= self.spec.tolerances["horiz"]


TASKS: dict[str, Task] = {t.spec.task_id: t for t in (ToyStack(), ToyPlace(), ToyInsert(), ToyPush())}


def get_task(task_id: str) -> Task:
    if task_id not in TASKS:
        raise EnvError(f"unknown task {task_id!r}; choose from {sorted(TASKS)}")
    return TASKS[task_id]

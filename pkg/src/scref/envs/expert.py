"""Stateless scripted experts: phase is inferred from the world state each step."""

from __future__ import annotations

import numpy as np

from ..geometry import rot_z
from .core import ACTION_HIGH, ACTION_LOW, POS_STEP, YAW_STEP, WorldState
from .tasks import (
    BOWL_HALF,
    CUBE_HALF,
    PEG_HALF_LEN,
    PUSH_RADIUS,
    SPHERE_R,
    Task,
)

_GAIN = 0.5
_EXPERT_POS_STEP = 0.008  # deliberate pace, well inside the env bound


def _goto(state: WorldState, target: np.ndarray, grip: float) -> np.ndarray:
    """Bounded P-step toward a world-frame target, with mild yaw regulation to 0."""
    world = _GAIN * (np.asarray(target) - state.ee_pos)
    local = rot_z(state.ee_yaw).T @ world
    local = np.clip(local, -_EXPERT_POS_STEP, _EXPERT_POS_STEP)
    dyaw = float(np.clip(-0.5 * state.ee_yaw, -YAW_STEP, YAW_STEP))
    return np.array([local[0], local[1], local[2], dyaw, grip])


def _pick_and_carry(state, obj, grasp_point, carry_obj_target, drop_close: float):
    """Shared grasp-transport skeleton; returns the action for this step.

    While holding, the OBJECT center is steered (the rigid grasp offset maps it
    to an end-effector target); the gripper opens once within drop_close of the
    carry target.
    """
    ee = state.ee_pos
    if obj.grasped:
        offset = ee - obj.position
        horiz = np.linalg.norm(obj.position[:2] - carry_obj_target[:2])
        if horiz > 0.005:
            target_obj = np.array([carry_obj_target[0], carry_obj_target[1], 0.08])
            return _goto(state, target_obj + offset, 0.0)
        if np.linalg.norm(obj.position - carry_obj_target) < drop_close:
            return _goto(state, carry_obj_target + offset, 1.0)  # release
        return _goto(state, carry_obj_target + offset, 0.0)
    horiz = np.linalg.norm(ee[:2] - grasp_point[:2])
    if horiz > 0.005:
        hover = np.array([grasp_point[0], grasp_point[1], grasp_point[2] + 0.05])
        return _goto(state, hover, 1.0)
    if np.linalg.norm(ee - grasp_point) > 0.012:
        return _goto(state, grasp_point, 1.0)
    return _goto(state, grasp_point, 0.0)  # close within grasp radius


def _expert_stack(state: WorldState) -> np.ndarray:
    a, b = state.obj("cube_a"), state.obj("cube_b")
    place = np.array([b.position[0], b.position[1], b.position[2] + 2 * CUBE_HALF])
    gp = a.position + np.array([0.0, 0.0, CUBE_HALF])
    return _pick_and_carry(state, a, gp, place, drop_close=0.003)


def _expert_place(state: WorldState) -> np.ndarray:
    s, bowl = state.obj("sphere"), state.obj("bowl")
    # release just above the rim; the recess centers the sphere
    drop = np.array([bowl.position[0], bowl.position[1], 2 * BOWL_HALF[2] + SPHERE_R])
    return _pick_and_carry(state, s, s.position.copy(), drop, drop_close=0.003)


def _expert_insert(state: WorldState) -> np.ndarray:
    peg, block = state.obj("peg"), state.obj("block")
    ee = state.ee_pos
    if peg.grasped:
        tip = peg.position - np.array([0.0, 0.0, PEG_HALF_LEN])
        offset = ee - tip
        hole_xy = block.position[:2]
        if np.linalg.norm(tip[:2] - hole_xy) > 0.004:
            target_tip = np.array([hole_xy[0], hole_xy[1], 2 * block.half_extent[2] + 0.015])
        else:
            target_tip = np.array([hole_xy[0], hole_xy[1], 0.012])
        return _goto(state, target_tip + offset, 0.0)
    gp = peg.position + np.array([0.0, 0.0, PEG_HALF_LEN / 2])
    if np.linalg.norm(ee[:2] - gp[:2]) > 0.005:
        return _goto(state, np.array([gp[0], gp[1], gp[2] + 0.05]), 1.0)
    if np.linalg.norm(ee - gp) > 0.012:
        return _goto(state, gp, 1.0)
    return _goto(state, gp, 0.0)


def _expert_push(state: WorldState) -> np.ndarray:
    cube = state.obj("cube")
    to_goal = state.goal_xy - cube.position[:2]
    dist = float(np.linalg.norm(to_goal))
    if dist <= 0.012:
        return np.array([0.0, 0.0, 0.0, 0.0, 1.0])
    u = to_goal / dist
    behind = cube.position[:2] - u * (PUSH_RADIUS + 0.008)
    d_behind = float(np.linalg.norm(state.ee_pos[:2] - behind))
    if d_behind > 0.015:
        if state.ee_pos[2] < 0.065:
            target = np.array([state.ee_pos[0], state.ee_pos[1], 0.08])  # climb clear first
        else:
            target = np.array([behind[0], behind[1], 0.08])
    elif state.ee_pos[2] > 0.028:
        target = np.array([behind[0], behind[1], 0.02])
    else:
        step = state.ee_pos[:2] + u * 0.012
        target = np.array([step[0], step[1], 0.02])
    return _goto(state, target, 1.0)


_EXPERTS = {
    "toy-stack": _expert_stack,
    "toy-place": _expert_place,
    "toy-insert": _expert_insert,
    "toy-push": _expert_push,
}


def expert_action(state: WorldState, task: Task) -> np.ndarray:
    """Deterministic bounded waypoint-controller action for the current state."""
    return np.clip(_EXPERTS[task.spec.task_id](state), ACTION_LOW, ACTION_HIGH)


def noisy_expert_action(state: WorldState, task: Task, rng: np.random.Generator, noise_frac: float) -> np.ndarray:
    """Expert action plus zero-mean Gaussian noise, sigma = noise_frac of each half-range."""
    noise = rng.normal(0.0, noise_frac, 5) * (ACTION_HIGH - ACTION_LOW) / 2.0
    return np.clip(expert_action(state, task) + noise, ACTION_LOW, ACTION_HIGH)

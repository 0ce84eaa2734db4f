import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from scref.geometry import (
    DeltaState,
    EEPose,
    InvalidPoseError,
    apply_delta,
    euler_from_rot,
    pose_compose,
    pose_inverse,
    random_rotation,
    relative_delta,
    rot_from_euler,
    rot_z,
)


def random_pose(rng, lock_free=True):
    """Random valid pose; pitch kept away from the gimbal-lock set when lock_free."""
    while True:
        rot = random_rotation(rng)
        if not lock_free or abs(euler_from_rot(rot)[1]) < np.pi / 2 - 1e-3:
            break
    return EEPose(rng.uniform(-1, 1, 3), rot, rng.uniform(0, 1))


def homogeneous(pose):
    t = np.eye(4)
    t[:3, :3] = pose.rotation
    t[:3, 3] = pose.position
    return t


def oracle_delta(a, b):
    """Brute-force reference: 7-vector from T_a^-1 T_b with scipy Euler extraction."""
    rel = np.linalg.inv(homogeneous(a)) @ homogeneous(b)
    eul = Rotation.from_matrix(rel[:3, :3]).as_euler("XYZ")
    return np.concatenate([rel[:3, 3], eul, [b.gripper - a.gripper]])


def test_relative_delta_identity():
    rng = np.random.default_rng(0)
    a = random_pose(rng)
    d = relative_delta(a, a)
    np.testing.assert_allclose(d.as_vector(), np.zeros(7), atol=1e-12)


def test_relative_delta_pure_translation():
    a = EEPose.identity()
    b = EEPose(np.array([0.1, 0.0, 0.0]), np.eye(3), 0.0)
    d = relative_delta(a, b)
    np.testing.assert_allclose(d.dpos, [0.1, 0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(d.deuler, 0.0, atol=1e-15)
    assert d.dgrip == 0.0


def test_relative_delta_matches_homogeneous_oracle():
    rng = np.random.default_rng(1)
    for _ in range(500):
        a, b = random_pose(rng), random_pose(rng)
        got = relative_delta(a, b).as_vector()
        np.testing.assert_allclose(got, oracle_delta(a, b), atol=1e-9)


def test_relative_delta_frame_equivariance():
    rng = np.random.default_rng(2)
    for _ in range(200):
        a, b = random_pose(rng), random_pose(rng)
        base = relative_delta(a, b).as_vector()
        g_rot, g_t = random_rotation(rng), rng.uniform(-1, 1, 3)
        a2 = EEPose(g_rot @ a.position + g_t, g_rot @ a.rotation, a.gripper)
        b2 = EEPose(g_rot @ b.position + g_t, g_rot @ b.rotation, b.gripper)
        np.testing.assert_allclose(relative_delta(a2, b2).as_vector(), base, atol=1e-9)


def test_apply_delta_zero_and_axis():
    rng = np.random.default_rng(3)
    a = random_pose(rng)
    back = apply_delta(a, DeltaState.zero())
    np.testing.assert_allclose(back.position, a.position, atol=1e-15)
    np.testing.assert_allclose(back.rotation, a.rotation, atol=1e-15)

    up = apply_delta(EEPose.identity(), DeltaState(np.array([0, 0, 0.05]), np.zeros(3), 0.0))
    np.testing.assert_allclose(up.position, [0, 0, 0.05], atol=1e-15)


def test_apply_delta_round_trip():
    rng = np.random.default_rng(4)
    for _ in range(1000):
        a = random_pose(rng)
        d = DeltaState(
            rng.uniform(-0.5, 0.5, 3),
            rng.uniform(-1.2, 1.2, 3),
            rng.uniform(-a.gripper, 1 - a.gripper),
        )
        b = apply_delta(a, d)
        rec = relative_delta(a, b)
        if abs(rec.deuler[1]) < np.pi / 2 - 1e-3:
            np.testing.assert_allclose(rec.as_vector(), d.as_vector(), atol=1e-8)


def test_euler_round_trip_from_rotation():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        r = random_rotation(rng)
        if abs(euler_from_rot(r)[1]) >= np.pi / 2 - 1e-3:
            continue
        np.testing.assert_allclose(rot_from_euler(euler_from_rot(r)), r, atol=1e-9)


def test_euler_round_trip_from_angles():
    rng = np.random.default_rng(6)
    for _ in range(1000):
        e = np.array([rng.uniform(-np.pi, np.pi), rng.uniform(-1.4, 1.4), rng.uniform(-np.pi, np.pi)])
        np.testing.assert_allclose(euler_from_rot(rot_from_euler(e)), e, atol=1e-9)


def test_euler_axis_cases():
    np.testing.assert_allclose(euler_from_rot(np.eye(3)), 0.0, atol=1e-15)
    np.testing.assert_allclose(euler_from_rot(rot_z(np.pi / 2)), [0, 0, np.pi / 2], atol=1e-12)
    np.testing.assert_allclose(rot_from_euler([0, 0, 0]), np.eye(3), atol=1e-15)
    np.testing.assert_allclose(rot_from_euler([np.pi, 0, 0]), np.diag([1.0, -1.0, -1.0]), atol=1e-12)


def test_euler_matches_scipy_off_lock():
    rng = np.random.default_rng(7)
    for _ in range(500):
        r = random_rotation(rng)
        if abs(euler_from_rot(r)[1]) >= np.pi / 2 - 1e-3:
            continue
        np.testing.assert_allclose(euler_from_rot(r), Rotation.from_matrix(r).as_euler("XYZ"), atol=1e-9)


def test_gimbal_lock_pins_roll():
    r = rot_from_euler([0.4, np.pi / 2, 0.9])
    e = euler_from_rot(r)
    assert e[0] == 0.0
    assert abs(e[1] - np.pi / 2) < 1e-9
    # yaw absorbs the free angle: reconstruction still matches the matrix
    np.testing.assert_allclose(rot_from_euler(e), r, atol=1e-9)


def test_angles_in_half_open_interval():
    rng = np.random.default_rng(8)
    for _ in range(500):
        e = euler_from_rot(random_rotation(rng))
        assert np.all(e > -np.pi) and np.all(e <= np.pi)


def test_compose_inverse_and_associativity():
    rng = np.random.default_rng(9)
    a = random_pose(rng)
    ident = pose_compose(a, pose_inverse(a))
    np.testing.assert_allclose(ident.position, 0.0, atol=1e-12)
    np.testing.assert_allclose(ident.rotation, np.eye(3), atol=1e-12)

    b = random_pose(rng)
    left = pose_compose(EEPose.identity(gripper=b.gripper), b)
    np.testing.assert_allclose(left.position, b.position, atol=1e-15)
    np.testing.assert_allclose(left.rotation, b.rotation, atol=1e-15)

    for _ in range(200):
        x, y, z = (random_pose(rng) for _ in range(3))
        lhs = pose_compose(pose_compose(x, y), z)
        rhs = pose_compose(x, pose_compose(y, z))
        np.testing.assert_allclose(lhs.position, rhs.position, atol=1e-10)
        np.testing.assert_allclose(lhs.rotation, rhs.rotation, atol=1e-10)


def test_invalid_inputs_raise():
    with pytest.raises(InvalidPoseError):
        EEPose(np.zeros(3), np.eye(3) * 1.001, 0.0)
    with pytest.raises(InvalidPoseError):
        EEPose(np.zeros(3), np.eye(3), 1.5)
    with pytest.raises(InvalidPoseError):
        euler_from_rot(np.full((3, 3), 0.5))
    bad = np.eye(3)
    bad[0, 0] = -1.0  # det -1 reflection
    with pytest.raises(InvalidPoseError):
        euler_from_rot(bad)


def test_pose_vector_round_trip():
    rng = np.random.default_rng(10)
    for _ in range(200):
        p = random_pose(rng)
        q = EEPose.from_vector(p.as_vector())
        np.testing.assert_allclose(q.position, p.position, atol=1e-12)
        np.testing.assert_allclose(q.rotation, p.rotation, atol=1e-9)
        assert q.gripper == pytest.approx(p.gripper, abs=1e-12)

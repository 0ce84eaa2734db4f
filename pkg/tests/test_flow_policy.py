import numpy as np
import pytest

import scref.autodiff as ad
from scref.autodiff import Tape
from scref.flow_policy import (
    FMTrainItem,
    FlowPolicy,
    FlowPolicyConfig,
    decode_lookahead,
    fm_loss,
    integrate_chunk,
    interpolate_path,
    label_demo,
    sample_action,
    total_loss,
)
from scref.geometry import EEPose, relative_delta, rot_z

from gradcheck import finite_diff_check

TINY = FlowPolicyConfig(
    obs_dim=4, horizon=3, action_dim=2, d_model=8, n_blocks=2, n_heads=2,
    mlp_ratio=2, tap_block=2, head_hidden=8,
    action_center=(0.0, 0.0), action_half=(1.0, 1.0),
)


class StubField:
    """Fake policy with a constant velocity field, for ODE mechanics tests."""

    def __init__(self, cfg, value):
        self.cfg = cfg
        self.value = value

    def forward(self, x, t, obs):
        b = x.shape[0]
        v = ad.constant(np.full_like(x, self.value))
        return v, ad.constant(np.zeros((b, 1))), ad.constant(np.zeros((b, 7)))


def make_items(rng, cfg, n=6):
    items = []
    for _ in range(n):
        items.append(
            FMTrainItem(
                obs=rng.standard_normal(cfg.obs_dim),
                x1=rng.standard_normal((cfg.horizon, cfg.action_dim)),
                progress=float(rng.uniform()),
                delta=rng.standard_normal(7) * 0.1,
                t=float(rng.uniform()),
                x0=rng.standard_normal((cfg.horizon, cfg.action_dim)),
            )
        )
    return items


def test_interpolate_endpoints_and_midpoint():
    rng = np.random.default_rng(0)
    x0, x1 = rng.standard_normal((4, 3)), rng.standard_normal((4, 3))
    np.testing.assert_array_equal(interpolate_path(x0, x1, 0.0), x0)
    np.testing.assert_array_equal(interpolate_path(x0, x1, 1.0), x1)
    np.testing.assert_allclose(interpolate_path(np.zeros((2, 2)), 2 * np.ones((2, 2)), 0.5), 1.0)
    with pytest.raises(ValueError):
        interpolate_path(x0, x1, 1.5)


def test_fm_loss_perfect_and_unit():
    rng = np.random.default_rng(1)
    items = make_items(rng, TINY)

    class Perfect:
        cfg = TINY

        def forward(self, x, t, obs):
            target = np.stack([it.x1 - it.x0 for it in items])
            return ad.constant(target), ad.constant(np.zeros((len(items), 1))), ad.constant(np.zeros((len(items), 7)))

    assert float(fm_loss(Perfect(), items).data) == 0.0

    for it in items:
        it.x0 = np.zeros_like(it.x0)
        it.x1 = np.ones_like(it.x1)
    zero_field = StubField(TINY, 0.0)
    assert float(fm_loss(zero_field, items).data) == pytest.approx(1.0)


def test_fm_loss_matches_straight_line_oracle():
    rng = np.random.default_rng(2)
    model = FlowPolicy(TINY, rng)
    items = make_items(rng, TINY)
    got = float(fm_loss(model, items).data)
    # independent recomputation
    obs = np.stack([it.obs for it in items])
    t = np.array([it.t for it in items])
    xt = np.stack([it.t * it.x1 + (1 - it.t) * it.x0 for it in items])
    v, _, _ = model.forward(xt, t, obs)
    want = float(np.mean((v.data - np.stack([it.x1 - it.x0 for it in items])) ** 2))
    assert abs(got - want) < 1e-12


def test_total_loss_components_and_reduction():
    rng = np.random.default_rng(3)
    model = FlowPolicy(TINY, rng)
    items = make_items(rng, TINY)

    loss0, parts0 = total_loss(model, items, 0.0, 0.0)
    assert float(loss0.data) == pytest.approx(float(fm_loss(model, items).data), abs=1e-15)
    assert parts0["loss_prog"] > 0.0  # still reported when unweighted

    loss1, parts1 = total_loss(model, items, 1.0, 1.0)
    want = parts1["loss_fm"] + parts1["loss_prog"] + parts1["loss_delta"]
    assert float(loss1.data) == pytest.approx(want, abs=1e-12)

    with pytest.raises(ValueError):
        total_loss(model, [], 1.0, 1.0)


def test_zero_field_returns_initial_noise():
    model = StubField(TINY, 0.0)
    rng = np.random.default_rng(5)
    expected_x0 = np.random.default_rng(5).standard_normal((1, TINY.horizon, TINY.action_dim))
    chunk, look = sample_action(model, np.zeros(TINY.obs_dim), steps=7, rng=rng)
    np.testing.assert_array_equal(chunk, TINY.denormalize(expected_x0[0]))
    assert look.progress == 0.0


def test_constant_field_exact_for_any_step_count():
    model = StubField(TINY, 0.37)
    x0 = np.random.default_rng(6).standard_normal((2, TINY.horizon, TINY.action_dim))
    obs = np.zeros((2, TINY.obs_dim))
    for steps in (1, 4, 16, 64):
        xn, _, _ = integrate_chunk(model, obs, x0, steps)
        np.testing.assert_allclose(xn, x0 + 0.37, atol=1e-12)
    with pytest.raises(ValueError):
        integrate_chunk(model, obs, x0, 0)


def test_model_gradients_match_finite_differences():
    rng = np.random.default_rng(7)
    model = FlowPolicy(TINY, rng)
    items = make_items(rng, TINY, n=3)

    def loss_builder():
        return total_loss(model, items, 1.0, 1.0)[0]

    finite_diff_check(loss_builder, model.params(), rng, n_samples=64)


def test_query_order_sensitivity():
    # permuting chunk rows must not merely permute the field output rows:
    # position embeddings tie content to slots
    rng = np.random.default_rng(8)
    model = FlowPolicy(TINY, rng)
    x = rng.standard_normal((1, TINY.horizon, TINY.action_dim))
    obs = rng.standard_normal((1, TINY.obs_dim))
    t = np.array([0.3])
    v1, _, _ = model.forward(x, t, obs)
    perm = [2, 0, 1]
    v2, _, _ = model.forward(x[:, perm], t, obs)
    assert not np.allclose(v2.data, v1.data[:, perm], atol=1e-9)


def test_decode_lookahead_clamps():
    look = decode_lookahead(1.7, np.array([0.1, 0.0, 0.0, 4.0, 0.0, 0.0, -2.0]))
    assert look.progress == 1.0
    assert -np.pi < look.delta.deuler[0] <= np.pi
    assert look.delta.dgrip == -1.0
    assert decode_lookahead(-0.5, np.zeros(7)).progress == 0.0


def _line_trajectory(total, cfg, step_vec, yaw_step=0.0):
    poses, obs, actions = [], [], []
    pose = EEPose(np.zeros(3), np.eye(3), 0.5)
    for t in range(total):
        poses.append(pose)
        obs.append(np.concatenate([pose.as_vector(), np.zeros(cfg.obs_dim - 7)]))
        actions.append(np.concatenate([step_vec, [yaw_step, 0.5]]))
        pose = EEPose(pose.position + step_vec, pose.rotation @ rot_z(yaw_step), 0.5)
    return np.stack(obs), np.stack(actions), poses


def test_label_demo_endpoints_and_static():
    cfg = FlowPolicyConfig(obs_dim=8, horizon=4, action_dim=5)
    rng = np.random.default_rng(9)
    obs, actions, poses = _line_trajectory(10, cfg, np.zeros(3))
    items = label_demo(obs, actions, poses, cfg.horizon, 2, rng, cfg)
    assert items[0].progress == 0.0
    assert items[-1].progress == 1.0
    for it in items:
        np.testing.assert_allclose(it.delta, 0.0, atol=1e-12)  # static poses

    with pytest.raises(ValueError):
        label_demo(obs[:1], actions[:1], poses[:1], cfg.horizon, 2, rng, cfg)


def test_label_demo_delta_matches_geometry_oracle():
    cfg = FlowPolicyConfig(obs_dim=8, horizon=4, action_dim=5)
    rng = np.random.default_rng(10)
    obs, actions, poses = _line_trajectory(12, cfg, np.array([0.004, -0.002, 0.001]), yaw_step=0.03)
    items = label_demo(obs, actions, poses, cfg.horizon, 0, rng, cfg)
    for t, it in enumerate(items):
        future = min(t + cfg.horizon, len(poses) - 1)
        want = relative_delta(poses[t], poses[future]).as_vector()
        np.testing.assert_allclose(it.delta, want, atol=1e-12)


def test_label_demo_chunk_padding():
    cfg = FlowPolicyConfig(obs_dim=8, horizon=6, action_dim=5)
    rng = np.random.default_rng(11)
    obs, actions, poses = _line_trajectory(5, cfg, np.array([0.001, 0.0, 0.0]))
    items = label_demo(obs, actions, poses, cfg.horizon, 0, rng, cfg)
    last = cfg.denormalize(items[-1].x1)
    np.testing.assert_allclose(last, np.repeat(actions[-1][None], cfg.horizon, axis=0), atol=1e-12)

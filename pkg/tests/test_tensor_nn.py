import numpy as np
import pytest

import scref.autodiff as ad
from scref.autodiff import NonFiniteError, Tape, TapeError
from scref.checkpoint import (
    CheckpointError,
    assign_params,
    config_digest,
    load_checkpoint,
    save_checkpoint,
)
from scref.nn import MLP, AttentionBlock, Linear, attention_stack_forward, params_list
from scref.optim import AdamW, clip_by_global_norm, global_grad_norm

from gradcheck import finite_diff_check


def test_matmul_identity_and_mse_zero():
    a = ad.constant(np.arange(9.0).reshape(3, 3))
    out = ad.matmul(ad.constant(np.eye(3)), a)
    np.testing.assert_array_equal(out.data, a.data)
    x = ad.constant(np.random.default_rng(0).standard_normal((4, 5)))
    assert float(ad.mse(x, x).data) == 0.0


def test_backward_of_mse_against_zero():
    rng = np.random.default_rng(1)
    x = ad.param(rng.standard_normal((3, 4)))
    with Tape() as tape:
        loss = ad.mse(x, ad.constant(np.zeros((3, 4))))
    (g,) = tape.gradients(loss, [x])
    np.testing.assert_allclose(g, 2.0 * x.data / x.data.size, atol=1e-15)


def test_gradient_of_constant_path_is_zero():
    x = ad.param(np.ones(3))
    y = ad.param(np.ones(3))
    with Tape() as tape:
        loss = ad.mean_all(ad.mul(y, y))
    (gx,) = tape.gradients(loss, [x])
    np.testing.assert_array_equal(gx, np.zeros(3))


def test_fanout_accumulates():
    x = ad.param(np.array(3.0))
    with Tape() as tape:
        loss = ad.mean_all(ad.add(ad.mul(x, x), ad.scale(x, 5.0)))  # x^2 + 5x
    (g,) = tape.gradients(loss, [x])
    assert float(g) == pytest.approx(2 * 3.0 + 5.0)


def test_composite_graph_finite_difference():
    rng = np.random.default_rng(2)
    w1 = ad.param(rng.standard_normal((6, 8)) * 0.5)
    b1 = ad.param(rng.standard_normal(8) * 0.1)
    w2 = ad.param(rng.standard_normal((8, 3)) * 0.5)
    b2 = ad.param(rng.standard_normal(3) * 0.1)
    x = np.asarray(rng.standard_normal((5, 6)))
    target = np.asarray(rng.standard_normal((5, 3)))

    def loss_builder():
        h = ad.tanh(ad.affine(ad.constant(x), w1, b1))
        h = ad.softplus(ad.affine(h, w2, b2))
        return ad.mse(h, ad.constant(target))

    finite_diff_check(loss_builder, [w1, b1, w2, b2], rng, n_samples=64)


def test_attention_block_finite_difference():
    rng = np.random.default_rng(3)
    block = AttentionBlock(d_model=8, n_heads=2, mlp_ratio=2, rng=rng)
    params = params_list(block.named_params("blk"))
    x = rng.standard_normal((2, 5, 8))
    target = rng.standard_normal((2, 5, 8))

    def loss_builder():
        return ad.mse(block(ad.constant(x)), ad.constant(target))

    finite_diff_check(loss_builder, params, rng, n_samples=64)


def test_misc_ops_finite_difference():
    rng = np.random.default_rng(4)
    a = ad.param(rng.standard_normal((4, 6)))
    b = ad.param(rng.standard_normal((4, 6)))

    def loss_builder():
        m = ad.minimum(a, b)
        c = ad.concat([m, ad.relu(a)], axis=1)
        s = ad.slice_axis(c, 1, 2, 9)
        t = ad.transpose(ad.reshape(s, (4, 7)), (1, 0))
        return ad.mean_all(ad.mul(t, t))

    finite_diff_check(loss_builder, [a, b], rng, n_samples=48)


def test_layernorm_finite_difference():
    rng = np.random.default_rng(5)
    gain = ad.param(rng.uniform(0.5, 1.5, 10))
    bias = ad.param(rng.standard_normal(10) * 0.1)
    x = ad.param(rng.standard_normal((3, 10)))

    def loss_builder():
        return ad.mean_all(ad.mul(ad.layer_norm(x, gain, bias), ad.constant(np.arange(10.0))))

    finite_diff_check(loss_builder, [x, gain, bias], rng, n_samples=48)


def test_non_scalar_loss_and_consumed_tape_raise():
    x = ad.param(np.ones(3))
    with Tape() as tape:
        y = ad.mul(x, x)
    with pytest.raises(TapeError):
        tape.gradients(y, [x])
    with Tape() as tape:
        loss = ad.mean_all(ad.mul(x, x))
    tape.gradients(loss, [x])
    with pytest.raises(TapeError):
        tape.gradients(loss, [x])


def test_non_finite_surfaces_immediately():
    with pytest.raises(NonFiniteError):
        ad.log(ad.constant(np.array([-1.0])))
    with pytest.raises(NonFiniteError):
        ad.exp(ad.constant(np.array([1e6])))


def test_shape_mismatch_raises():
    with pytest.raises(ValueError):
        ad.mse(ad.constant(np.zeros(3)), ad.constant(np.zeros(4)))


def test_determinism_bit_identical():
    def run():
        rng = np.random.default_rng(7)
        net = MLP([4, 16, 2], rng)
        x = rng.standard_normal((8, 4))
        with Tape() as tape:
            loss = ad.mse(net(ad.constant(x)), ad.constant(np.zeros((8, 2))))
        grads = tape.gradients(loss, params_list(net.named_params("n")))
        return float(loss.data), [g.copy() for g in grads]

    l1, g1 = run()
    l2, g2 = run()
    assert l1 == l2
    for a, b in zip(g1, g2):
        np.testing.assert_array_equal(a, b)


def test_attention_stack_exposes_hidden_states():
    rng = np.random.default_rng(8)
    blocks = [AttentionBlock(8, 2, 2, rng) for _ in range(4)]
    out, hidden = attention_stack_forward(blocks, ad.constant(rng.standard_normal((1, 5, 8))))
    assert len(hidden) == 4
    np.testing.assert_array_equal(hidden[-1].data, out.data)


def test_adamw_zero_grad_no_decay_keeps_params():
    p = ad.param(np.array([1.0, -2.0]))
    opt = AdamW([p], lr=0.1, weight_decay=0.0)
    opt.step([np.zeros(2)])
    np.testing.assert_array_equal(p.data, [1.0, -2.0])


def test_global_norm_clip_halves_at_double():
    grads = [np.array([60.0]), np.array([80.0])]  # norm 100
    assert global_grad_norm(grads) == pytest.approx(100.0)
    clipped, norm = clip_by_global_norm(grads, 50.0)
    assert norm == pytest.approx(100.0)
    np.testing.assert_allclose(clipped[0], [30.0])
    np.testing.assert_allclose(clipped[1], [40.0])


def test_adamw_applies_global_clip():
    p = ad.param(np.zeros(2))
    opt = AdamW([p], lr=1.0, clip_norm=50.0)
    opt.step([np.array([60.0, 80.0])])
    p2 = ad.param(np.zeros(2))
    opt2 = AdamW([p2], lr=1.0)
    opt2.step([np.array([30.0, 40.0])])
    np.testing.assert_array_equal(p.data, p2.data)


def test_adamw_converges_on_scalar_quadratic():
    # minimize (x - 3.7)^2 from 0; closed-form minimizer 3.7
    p = ad.param(np.array(0.0))
    opt = AdamW([p], lr=1e-2)
    for _ in range(2000):
        with Tape() as tape:
            loss = ad.mse(p, ad.constant(np.array(3.7)))
        opt.step(tape.gradients(loss, [p]))
    assert abs(float(p.data) - 3.7) < 1e-3


def test_adamw_shape_mismatch_raises():
    p = ad.param(np.zeros(3))
    opt = AdamW([p], lr=0.1)
    with pytest.raises(ValueError):
        opt.step([np.zeros(4)])


def test_checkpoint_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(9)
    params = {
        "enc.w": rng.standard_normal((4, 7)),
        "enc.b": rng.standard_normal(7),
        "scalar": np.array(rng.standard_normal()),
    }
    digest = config_digest("some config text")
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, params, seed=42, digest_hex=digest)
    ckpt = load_checkpoint(path)
    assert ckpt.seed == 42
    assert ckpt.config_digest == digest
    assert set(ckpt.params) == set(params)
    for name in params:
        assert ckpt.params[name].tobytes() == np.ascontiguousarray(params[name]).tobytes()

    save_checkpoint(path, params, seed=42, digest_hex=digest)
    second = (tmp_path / "model.ckpt").read_bytes()
    save_checkpoint(tmp_path / "again.ckpt", params, seed=42, digest_hex=digest)
    assert (tmp_path / "again.ckpt").read_bytes() == second


def test_checkpoint_corruption_detected(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"NOTMAGIC" + b"\x00" * 40)
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
    good = tmp_path / "good.ckpt"
    save_checkpoint(good, {"a": np.zeros(3)}, seed=0, digest_hex=config_digest(""))
    data = good.read_bytes()
    (tmp_path / "trunc.ckpt").write_bytes(data[:-8])
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "trunc.ckpt")


def test_assign_params_round_trip(tmp_path):
    rng = np.random.default_rng(10)
    net = Linear(3, 4, rng)
    named = net.named_params("lin")
    digest = config_digest("cfg")
    save_checkpoint(tmp_path / "l.ckpt", {k: v.data for k, v in named.items()}, 1, digest)

    net2 = Linear(3, 4, np.random.default_rng(11))
    assign_params(net2.named_params("lin"), load_checkpoint(tmp_path / "l.ckpt").params)
    np.testing.assert_array_equal(net2.w.data, net.w.data)
    with pytest.raises(CheckpointError):
        assign_params(Linear(3, 5, rng).named_params("lin"), load_checkpoint(tmp_path / "l.ckpt").params)

"""Flow-matching base policy over action chunks with lookahead heads.

One query produces an H-step action chunk plus two self-predictions decoded
from an intermediate transformer block: scalar task progress in [0, 1] and a
7-dim local-frame state increment over roughly the next H steps. The policy
works on normalized actions internally; chunks are returned in environment
units.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .checkpoint import config_digest
from .geometry import DeltaState, EEPose, relative_delta
from .nn import MLP, AttentionBlock, LayerNorm, Linear, attention_stack_forward, time_features
from .optim import AdamW


@dataclass(frozen=True)
class Observation:
    """State observation: end-effector pose plus task-specific object features."""

    ee: EEPose
    object_features: np.ndarray
    task_id: int

    def vector(self) -> np.ndarray:
        return np.concatenate([self.ee.as_vector(), np.asarray(self.object_features, dtype=np.float64)])


@dataclass(frozen=True)
class Lookahead:
    """Decoded self-prediction: progress clamped to [0, 1] and a state increment."""

    progress: float
    delta: DeltaState


@dataclass
class FMTrainItem:
    """One training example: conditioning, chunk target, labels, and flow draw."""

    obs: np.ndarray
    x1: np.ndarray  # normalized target chunk (H, A)
    progress: float
    delta: np.ndarray  # 7-vector label
    t: float
    x0: np.ndarray


@dataclass
class FlowPolicyConfig:
    obs_dim: int
    horizon: int = 16
    action_dim: int = 5
    d_model: int = 128
    n_blocks: int = 4
    n_heads: int = 4
    mlp_ratio: int = 2
    tap_block: int = 2  # 1-indexed block whose hidden states feed the heads
    head_hidden: int = 128
    ode_steps: int = 16
    # normalized action a_norm = (a - center) / half
    action_center: tuple = (0.0, 0.0, 0.0, 0.0, 0.5)
    action_half: tuple = (0.02, 0.02, 0.02, 0.1, 0.5)

    def __post_init__(self):
        if not (1 <= self.tap_block <= self.n_blocks):
            raise ValueError("tap_block must be within the block stack")

    def digest(self) -> str:
        fields_text = ",".join(f"{k}={v}" for k, v in sorted(vars(self).items()))
        return config_digest("flow-policy:" + fields_text)

    def normalize(self, actions: np.ndarray) -> np.ndarray:
        return (np.asarray(actions, dtype=np.float64) - np.array(self.action_center)) / np.array(self.action_half)

    def denormalize(self, normed: np.ndarray) -> np.ndarray:
        return np.asarray(normed, dtype=np.float64) * np.array(self.action_half) + np.array(self.action_center)


def interpolate_path(x0: np.ndarray, x1: np.ndarray, t: float) -> np.ndarray:
    """Straight interpolation t*x1 + (1-t)*x0 between noise and target chunks."""
    if not (0.0 <= t <= 1.0):
        raise ValueError(f"path time {t} outside [0, 1]")
    return t * np.asarray(x1) + (1.0 - t) * np.asarray(x0)


class FlowPolicy:
    """Velocity-field transformer over the token sequence [state, q_prog, q_delta, 16 action rows]."""

    N_QUERY_TOKENS = 3  # state token + progress query + delta query

    def __init__(self, cfg: FlowPolicyConfig, rng: np.random.Generator):
        self.cfg = cfg
        d = cfg.d_model
        self.state_enc = MLP([cfg.obs_dim, d, d], rng, activation="tanh")
        self.time_proj = Linear(d, d, rng)
        self.act_in = Linear(cfg.action_dim, d, rng)
        self.pos_emb = ad.param(rng.normal(0.0, 0.02, (cfg.horizon, d)))
        self.q_prog_emb = ad.param(rng.normal(0.0, 0.02, (1, d)))
        self.q_delta_emb = ad.param(rng.normal(0.0, 0.02, (1, d)))
        self.blocks = [AttentionBlock(d, cfg.n_heads, cfg.mlp_ratio, rng) for _ in range(cfg.n_blocks)]
        self.final_ln = LayerNorm(d)
        self.v_head = Linear(d, cfg.action_dim, rng)
        self.prog_head = MLP([d, cfg.head_hidden, 1], rng, activation="relu")
        self.delta_head = MLP([d, cfg.head_hidden, 7], rng, activation="relu")

    def named_params(self) -> dict[str, Tensor]:
        out = {
            "pos_emb": self.pos_emb,
            "q_prog_emb": self.q_prog_emb,
            "q_delta_emb": self.q_delta_emb,
        }
        out.update(self.state_enc.named_params("state_enc"))
        out.update(self.time_proj.named_params("time_proj"))
        out.update(self.act_in.named_params("act_in"))
        for i, blk in enumerate(self.blocks):
            out.update(blk.named_params(f"block{i}"))
        out.update(self.final_ln.named_params("final_ln"))
        out.update(self.v_head.named_params("v_head"))
        out.update(self.prog_head.named_params("prog_head"))
        out.update(self.delta_head.named_params("delta_head"))
        return out

    def params(self) -> list[Tensor]:
        named = self.named_params()
        return [named[k] for k in sorted(named)]

    def _tokens(self, x_norm: np.ndarray, t: np.ndarray, obs: np.ndarray) -> Tensor:
        b = x_norm.shape[0]
        d = self.cfg.d_model
        s_tok = ad.reshape(self.state_enc(ad.constant(obs)), (b, 1, d))
        q_prog = ad.add(ad.reshape(self.q_prog_emb, (1, 1, d)), ad.constant(np.zeros((b, 1, d))))
        q_delta = ad.add(ad.reshape(self.q_delta_emb, (1, 1, d)), ad.constant(np.zeros((b, 1, d))))
        a_tok = ad.add(self.act_in(ad.constant(x_norm)), self.pos_emb)
        tokens = ad.concat([s_tok, q_prog, q_delta, a_tok], axis=1)
        temb = ad.reshape(self.time_proj(ad.constant(time_features(t, d))), (b, 1, d))
        return ad.add(tokens, temb)

    def forward(self, x_norm: np.ndarray, t: np.ndarray, obs: np.ndarray) -> tuple[Tensor, Tensor, Tensor]:
        """Velocity field plus raw head outputs for a batch.

        x_norm: (B, H, A) normalized chunk state, t: (B,) flow times,
        obs: (B, obs_dim). Returns (velocity (B,H,A), progress (B,1), delta (B,7)).
        """
        cfg = self.cfg
        out, hidden = attention_stack_forward(self.blocks, self._tokens(x_norm, t, obs))
        h_final = self.final_ln(out)
        nq = self.N_QUERY_TOKENS
        v = self.v_head(ad.slice_axis(h_final, 1, nq, nq + cfg.horizon))
        tap = hidden[cfg.tap_block - 1]
        b = x_norm.shape[0]
        h_prog = ad.reshape(ad.slice_axis(tap, 1, 1, 2), (b, cfg.d_model))
        h_delta = ad.reshape(ad.slice_axis(tap, 1, 2, 3), (b, cfg.d_model))
        return v, self.prog_head(h_prog), self.delta_head(h_delta)


def decode_lookahead(prog_raw: float, delta_raw: np.ndarray) -> Lookahead:
    """Clamp/wrap raw head outputs into a valid Lookahead."""
    delta_raw = np.asarray(delta_raw, dtype=np.float64).reshape(7)
    eul = np.mod(delta_raw[3:6] + np.pi, 2.0 * np.pi) - np.pi
    eul[eul == -np.pi] = np.pi
    dgrip = min(1.0, max(-1.0, delta_raw[6]))
    return Lookahead(
        progress=float(min(1.0, max(0.0, prog_raw))),
        delta=DeltaState(delta_raw[:3], eul, dgrip),
    )


def integrate_chunk(model: FlowPolicy, obs: np.ndarray, x0: np.ndarray, steps: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Euler-integrate the learned field from noise for a batch of observations.

    Returns (normalized chunks (B,H,A), raw progress (B,), raw delta (B,7));
    the head outputs come from the first integration pass (t = 0).
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x = np.array(x0, dtype=np.float64)
    b = x.shape[0]
    prog = delta = None
    for k in range(steps):
        t = np.full(b, k / steps)
        v, p, d = model.forward(x, t, obs)
        if k == 0:
            prog, delta = p.data[:, 0].copy(), d.data.copy()
        x = x + v.data / steps
    return x, prog, delta


def sample_action(model: FlowPolicy, obs: Observation | np.ndarray, steps: int, rng: np.random.Generator) -> tuple[np.ndarray, Lookahead]:
    """Draw one action chunk (environment units) and the decoded lookahead."""
    vec = obs.vector() if isinstance(obs, Observation) else np.asarray(obs, dtype=np.float64)
    cfg = model.cfg
    x0 = rng.standard_normal((1, cfg.horizon, cfg.action_dim))
    xn, prog, delta = integrate_chunk(model, vec[None], x0, steps)
    return cfg.denormalize(xn[0]), decode_lookahead(prog[0], delta[0])


def sample_action_batch(
    model: FlowPolicy, obs_batch: np.ndarray, steps: int, rngs: list[np.random.Generator]
) -> tuple[np.ndarray, list[Lookahead]]:
    """Batched sampling with one RNG stream per row (bit-stable under re-batching)."""
    cfg = model.cfg
    x0 = np.stack([r.standard_normal((cfg.horizon, cfg.action_dim)) for r in rngs])
    xn, prog, delta = integrate_chunk(model, np.asarray(obs_batch, dtype=np.float64), x0, steps)
    return cfg.denormalize(xn), [decode_lookahead(p, d) for p, d in zip(prog, delta)]


# ---------------------------------------------------------------------------
# demo labeling


def label_step(
    obs: np.ndarray,
    actions: np.ndarray,
    poses: list[EEPose],
    t: int,
    horizon: int,
    delta_range: int,
    rng: np.random.Generator,
    cfg: FlowPolicyConfig,
) -> FMTrainItem:
    """Build the training item for step t of one episode (shared labeling rules)."""
    total = len(poses)
    chunk = actions[t : t + horizon]
    if chunk.shape[0] < horizon:
        pad = np.repeat(actions[-1][None], horizon - chunk.shape[0], axis=0)
        chunk = np.concatenate([chunk, pad], axis=0)
    offset = int(rng.integers(-delta_range, delta_range + 1)) if delta_range > 0 else 0
    t_future = min(max(t + horizon + offset, 0), total - 1)
    delta = relative_delta(poses[t], poses[t_future]).as_vector()
    return FMTrainItem(
        obs=np.asarray(obs[t], dtype=np.float64),
        x1=cfg.normalize(chunk),
        progress=t / (total - 1),
        delta=delta,
        t=float(rng.uniform()),
        x0=rng.standard_normal((horizon, cfg.action_dim)),
    )


def label_demo(
    obs: np.ndarray,
    actions: np.ndarray,
    poses: list[EEPose],
    horizon: int,
    delta_range: int,
    rng: np.random.Generator,
    cfg: FlowPolicyConfig,
) -> list[FMTrainItem]:
    """Label every step of one demonstration episode.

    Chunk targets are padded by repeating the final action; progress is the
    normalized timestep t/(T-1); the state-increment label looks ahead
    horizon + U{-delta_range..delta_range} steps (clamped to the episode).
    """
    total = len(poses)
    if total < 2:
        raise ValueError("trajectory must have at least 2 steps")
    if len(obs) != total or len(actions) != total:
        raise ValueError("obs/actions/poses lengths differ")
    return [label_step(obs, actions, poses, t, horizon, delta_range, rng, cfg) for t in range(total)]


# ---------------------------------------------------------------------------
# losses


def _batch_arrays(items: list[FMTrainItem]):
    obs = np.stack([it.obs for it in items])
    x1 = np.stack([it.x1 for it in items])
    x0 = np.stack([it.x0 for it in items])
    t = np.array([it.t for it in items])
    prog = np.array([[it.progress] for it in items])
    delta = np.stack([it.delta for it in items])
    xt = t[:, None, None] * x1 + (1.0 - t[:, None, None]) * x0
    return obs, x1, x0, t, prog, delta, xt


def fm_loss(model: FlowPolicy, items: list[FMTrainItem]) -> Tensor:
    """Mean squared error between the predicted field and x1 - x0."""
    if not items:
        raise ValueError("empty batch")
    obs, x1, x0, t, _, _, xt = _batch_arrays(items)
    v, _, _ = model.forward(xt, t, obs)
    return ad.mse(v, ad.constant(x1 - x0))


def total_loss(
    model: FlowPolicy, items: list[FMTrainItem], lambda_prog: float, lambda_delta: float
) -> tuple[Tensor, dict[str, float]]:
    """Joint objective: flow loss + weighted progress / state-increment MSE.

    The component values are always reported, also when their weight is zero.
    """
    if not items:
        raise ValueError("empty batch")
    obs, x1, x0, t, prog_lab, delta_lab, xt = _batch_arrays(items)
    v, prog, delta = model.forward(xt, t, obs)
    l_fm = ad.mse(v, ad.constant(x1 - x0))
    l_prog = ad.mse(prog, ad.constant(prog_lab))
    l_delta = ad.mse(delta, ad.constant(delta_lab))
    loss = ad.add(l_fm, ad.add(ad.scale(l_prog, lambda_prog), ad.scale(l_delta, lambda_delta)))
    parts = {
        "loss_fm": float(l_fm.data),
        "loss_prog": float(l_prog.data),
        "loss_delta": float(l_delta.data),
        "loss_total": float(loss.data),
    }
    return loss, parts


# ---------------------------------------------------------------------------
# stage-I training


@dataclass
class Stage1Config:
    steps: int = 6000
    batch: int = 32
    lr: float = 1e-4
    weight_decay: float = 0.0
    grad_clip: float = 0.0  # 0 disables clipping
    lambda_prog: float = 1.0
    lambda_delta: float = 1.0
    delta_range: int = 4  # temporal offset range for the lookahead label
    log_every: int = 100


class DemoSampler:
    """Uniform sampler over all (episode, timestep) pairs of a demo set."""

    def __init__(self, episodes, cfg: FlowPolicyConfig, delta_range: int):
        if not episodes:
            raise ValueError("no demo episodes")
        self.cfg = cfg
        self.delta_range = delta_range
        self.episodes = episodes
        self.index = [(e, t) for e, ep in enumerate(episodes) for t in range(len(ep.poses))]

    def sample(self, rng: np.random.Generator, batch: int) -> list[FMTrainItem]:
        picks = rng.integers(len(self.index), size=batch)
        out = []
        for i in picks:
            e, t = self.index[i]
            ep = self.episodes[e]
            out.append(label_step(ep.obs, ep.actions, ep.poses, t, self.cfg.horizon, self.delta_range, rng, self.cfg))
        return out


def train_flow_policy(
    model: FlowPolicy,
    episodes,
    train_cfg: Stage1Config,
    rng: np.random.Generator,
    log_rows: list | None = None,
) -> None:
    """Optimize the joint objective with AdamW; appends (step, losses) log rows."""
    sampler = DemoSampler(episodes, model.cfg, train_cfg.delta_range)
    params = model.params()
    opt = AdamW(
        params,
        lr=train_cfg.lr,
        weight_decay=train_cfg.weight_decay,
        clip_norm=train_cfg.grad_clip or None,
    )
    for step in range(train_cfg.steps):
        items = sampler.sample(rng, train_cfg.batch)
        with Tape() as tape:
            loss, parts = total_loss(model, items, train_cfg.lambda_prog, train_cfg.lambda_delta)
        opt.step(tape.gradients(loss, params))
        if log_rows is not None and (step % train_cfg.log_every == 0 or step == train_cfg.steps - 1):
            log_rows.append(
                {
                    "step": step,
                    "loss_total": parts["loss_total"],
                    "loss_fm": parts["loss_fm"],
                    "loss_prog": parts["loss_prog"],
                    "loss_delta": parts["loss_delta"],
                }
            )

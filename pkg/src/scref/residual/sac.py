"""Soft actor-critic updates for the residual policy (twin critics, targets)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tape
from ..optim import AdamW
from .networks import QCritic, ResidualActor, copy_params, polyak_update
from .replay import Batch


@dataclass
class SACConfig:
    obs_dim: int = 15
    base_feat_dim: int = 40  # executed sub-chunk, flattened (n_steps * 5)
    action_dim: int = 5
    hidden: int = 256
    gamma: float = 0.97
    tau: float = 0.01
    batch: int = 1024
    actor_lr: float = 1e-4
    critic_lr: float = 1e-4
    alpha: float = 0.2
    auto_alpha: bool = False
    alpha_lr: float = 3e-4
    target_entropy: float | None = None  # defaults to -action_dim when auto
    grad_clip: float = 50.0
    utd: float = 0.5
    train_freq: int = 64  # macro-steps between update bursts


class SACState:
    """Actor, twin critics with Polyak targets, their optimizers, and the RNG."""

    def __init__(self, cfg: SACConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng
        self.actor = ResidualActor(cfg.obs_dim, cfg.action_dim, cfg.hidden, rng)
        self.critic1 = QCritic(cfg.obs_dim, cfg.base_feat_dim, cfg.action_dim, cfg.hidden, rng)
        self.critic2 = QCritic(cfg.obs_dim, cfg.base_feat_dim, cfg.action_dim, cfg.hidden, rng)
        self.target1 = QCritic(cfg.obs_dim, cfg.base_feat_dim, cfg.action_dim, cfg.hidden, rng)
        self.target2 = QCritic(cfg.obs_dim, cfg.base_feat_dim, cfg.action_dim, cfg.hidden, rng)
        copy_params(self.target1.named_params("q"), self.critic1.named_params("q"))
        copy_params(self.target2.named_params("q"), self.critic2.named_params("q"))
        self._actor_params = self.actor.params()
        crit_named = {}
        crit_named.update(self.critic1.named_params("critic1"))
        crit_named.update(self.critic2.named_params("critic2"))
        self._critic_params = [crit_named[k] for k in sorted(crit_named)]
        self.actor_opt = AdamW(self._actor_params, lr=cfg.actor_lr, clip_norm=cfg.grad_clip)
        self.critic_opt = AdamW(self._critic_params, lr=cfg.critic_lr, clip_norm=cfg.grad_clip)
        self.log_alpha = float(np.log(cfg.alpha))
        self.updates_done = 0

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha))

    def named_params(self) -> dict[str, np.ndarray]:
        out = {k: v.data for k, v in self.actor.named_params().items()}
        out.update({k: v.data for k, v in self.critic1.named_params("critic1").items()})
        out.update({k: v.data for k, v in self.critic2.named_params("critic2").items()})
        return out


def sample_residual(
    actor: ResidualActor, o_w: np.ndarray, rng: np.random.Generator | None, deterministic: bool = False
) -> tuple[np.ndarray, float]:
    """Draw one residual action in (-1, 1)^A with its log probability."""
    o = np.atleast_2d(np.asarray(o_w, dtype=np.float64))
    xi = None if deterministic else rng.standard_normal((o.shape[0], actor.action_dim))
    a, logp = actor.act_np(o, xi)
    if not np.isfinite(a).all():
        raise FloatingPointError("actor produced non-finite action")
    return a[0], float(logp[0, 0])


def critic_update(sac: SACState, batch: Batch) -> dict[str, float]:
    """One twin-critic regression step toward the entropy-corrected target."""
    if len(batch) < 2:
        raise ValueError("batch must hold at least 2 transitions")
    cfg = sac.cfg
    xi = sac.rng.standard_normal((len(batch), cfg.action_dim))
    a_next, logp_next = sac.actor.act_np(batch.o_w_next, xi)
    q1_t = sac.target1.value_np(batch.o_w_next, batch.base_feat_next, a_next)
    q2_t = sac.target2.value_np(batch.o_w_next, batch.base_feat_next, a_next)
    soft = np.minimum(q1_t, q2_t) - sac.alpha * logp_next
    y = batch.r_final + cfg.gamma * (1.0 - batch.done) * soft

    with Tape() as tape:
        q1 = sac.critic1(ad.constant(batch.o_w), ad.constant(batch.base_feat), ad.constant(batch.a_res))
        q2 = sac.critic2(ad.constant(batch.o_w), ad.constant(batch.base_feat), ad.constant(batch.a_res))
        target = ad.constant(y)
        loss = ad.add(ad.mse(q1, target), ad.mse(q2, target))
    sac.critic_opt.step(tape.gradients(loss, sac._critic_params))

    polyak_update(sac.target1.named_params("t"), sac.critic1.named_params("t"), cfg.tau)
    polyak_update(sac.target2.named_params("t"), sac.critic2.named_params("t"), cfg.tau)
    return {"critic_loss": float(loss.data), "target_mean": float(y.mean())}


def actor_update(sac: SACState, batch: Batch) -> dict[str, float]:
    """Reparameterized policy step on E[alpha*log pi - min(Q1, Q2)]."""
    cfg = sac.cfg
    xi = sac.rng.standard_normal((len(batch), cfg.action_dim))
    with Tape() as tape:
        obs = ad.constant(batch.o_w)
        a, logp = sac.actor.rsample(obs, xi)
        bf = ad.constant(batch.base_feat)
        qmin = ad.minimum(sac.critic1(obs, bf, a), sac.critic2(obs, bf, a))
        loss = ad.mean_all(ad.sub(ad.scale(logp, sac.alpha), qmin))
    sac.actor_opt.step(tape.gradients(loss, sac._actor_params))
    sac.updates_done += 1

    entropy = -float(logp.data.mean())
    if cfg.auto_alpha:
        target_h = cfg.target_entropy if cfg.target_entropy is not None else -float(cfg.action_dim)
        # plain gradient step on log alpha toward the entropy target
        grad = -(entropy - target_h)
        sac.log_alpha -= cfg.alpha_lr * grad
    return {"actor_loss": float(loss.data), "entropy": entropy, "alpha": sac.alpha}


def update_burst(sac: SACState, buffer, rng: np.random.Generator) -> dict[str, float]:
    """ceil(utd * train_freq) paired critic+actor updates from the buffer."""
    n_updates = int(np.ceil(sac.cfg.utd * sac.cfg.train_freq))
    stats: dict[str, float] = {}
    for _ in range(n_updates):
        batch = buffer.sample(rng, sac.cfg.batch)
        if len(batch) < 2:
            break
        stats.update(critic_update(sac, batch))
        stats.update(actor_update(sac, batch))
    return stats

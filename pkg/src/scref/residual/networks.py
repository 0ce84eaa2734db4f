"""Residual actor (tanh-squashed Gaussian) and Q critics.

Both keep a pure-numpy inference path alongside the taped path used for
updates; the two share the same weights and formulas.
"""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..nn import Linear

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
_LOG_2PI = float(np.log(2.0 * np.pi))


def _squash_log_std(raw: np.ndarray) -> np.ndarray:
    return LOG_STD_MIN + 0.5 * (LOG_STD_MAX - LOG_STD_MIN) * (np.tanh(raw) + 1.0)


class ResidualActor:
    """MLP policy over the 16-dim augmented observation; actions in (-1, 1)^A."""

    def __init__(self, obs_dim: int, action_dim: int, hidden: int, rng: np.random.Generator):
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.l1 = Linear(obs_dim, hidden, rng)
        self.l2 = Linear(hidden, hidden, rng)
        self.mu = Linear(hidden, action_dim, rng)
        self.log_std_raw = Linear(hidden, action_dim, rng)
        # bias the squashed log-std toward sigma ~ 0.2 at init
        self.log_std_raw.b.data[:] = 0.8

    def named_params(self) -> dict[str, Tensor]:
        out = {}
        for name in ("l1", "l2", "mu", "log_std_raw"):
            out.update(getattr(self, name).named_params(f"actor.{name}"))
        return out

    def params(self) -> list[Tensor]:
        named = self.named_params()
        return [named[k] for k in sorted(named)]

    # --- taped path ---------------------------------------------------------

    def rsample(self, obs: Tensor, xi: np.ndarray) -> tuple[Tensor, Tensor]:
        """Reparameterized sample a = tanh(mu + sigma*xi) and its log density.

        xi is treated as a constant; gradients flow through mu and sigma. The
        tanh change of variables uses log(1 - tanh(u)^2) =
        2*(log 2 - u - softplus(-2u)).
        """
        h = ad.relu(self.l2(ad.relu(self.l1(obs))))
        mu = self.mu(h)
        raw = self.log_std_raw(h)
        log_std = ad.add_const(
            ad.scale(ad.tanh(raw), 0.5 * (LOG_STD_MAX - LOG_STD_MIN)),
            0.5 * (LOG_STD_MAX + LOG_STD_MIN),
        )
        std = ad.exp(log_std)
        xi_c = ad.constant(xi)
        pre = ad.add(mu, ad.mul(std, xi_c))
        action = ad.tanh(pre)
        gauss = ad.add_const(
            ad.neg(ad.add(log_std, ad.scale(ad.mul(xi_c, xi_c), 0.5))), -0.5 * _LOG_2PI
        )
        # -log(1 - tanh(u)^2) = 2u + 2*softplus(-2u) - 2 log 2
        corr = ad.scale(ad.add(pre, ad.softplus(ad.scale(pre, -2.0))), 2.0)
        log_prob_terms = ad.add_const(ad.add(gauss, corr), -2.0 * np.log(2.0))
        log_prob = ad.sum_axis(log_prob_terms, axis=1, keepdims=True)
        return action, log_prob

    # --- numpy path ---------------------------------------------------------

    def dist_params_np(self, obs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        h = np.maximum(obs @ self.l1.w.data + self.l1.b.data, 0.0)
        h = np.maximum(h @ self.l2.w.data + self.l2.b.data, 0.0)
        mu = h @ self.mu.w.data + self.mu.b.data
        log_std = _squash_log_std(h @ self.log_std_raw.w.data + self.log_std_raw.b.data)
        return mu, log_std

    def act_np(self, obs: np.ndarray, xi: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
        """Numpy sampling; xi=None gives the deterministic action tanh(mu)."""
        obs = np.atleast_2d(obs)
        mu, log_std = self.dist_params_np(obs)
        if xi is None:
            action = np.tanh(mu)
            pre = mu
            xi = np.zeros_like(mu)
        else:
            pre = mu + np.exp(log_std) * xi
            action = np.tanh(pre)
        gauss = -0.5 * xi**2 - log_std - 0.5 * _LOG_2PI
        corr = 2.0 * (np.log(2.0) - pre - np.logaddexp(0.0, -2.0 * pre))
        log_prob = (gauss - corr).sum(axis=1, keepdims=True)
        return action, log_prob


class QCritic:
    """State-action value over (augmented obs, executed base sub-chunk, residual)."""

    def __init__(self, obs_dim: int, base_feat_dim: int, action_dim: int, hidden: int, rng: np.random.Generator):
        din = obs_dim + base_feat_dim + action_dim
        self.l1 = Linear(din, hidden, rng)
        self.l2 = Linear(hidden, hidden, rng)
        self.l3 = Linear(hidden, 1, rng)

    def named_params(self, prefix: str) -> dict[str, Tensor]:
        out = {}
        for name in ("l1", "l2", "l3"):
            out.update(getattr(self, name).named_params(f"{prefix}.{name}"))
        return out

    def __call__(self, obs: Tensor, base_feat: Tensor, action: Tensor) -> Tensor:
        x = ad.concat([obs, base_feat, action], axis=1)
        h = ad.relu(self.l2(ad.relu(self.l1(x))))
        return self.l3(h)

    def value_np(self, obs: np.ndarray, base_feat: np.ndarray, action: np.ndarray) -> np.ndarray:
        x = np.concatenate([obs, base_feat, action], axis=1)
        h = np.maximum(x @ self.l1.w.data + self.l1.b.data, 0.0)
        h = np.maximum(h @ self.l2.w.data + self.l2.b.data, 0.0)
        return h @ self.l3.w.data + self.l3.b.data


def copy_params(dst_named: dict[str, Tensor], src_named: dict[str, Tensor]) -> None:
    for name, tensor in dst_named.items():
        tensor.data[...] = src_named[name].data


def polyak_update(target_named: dict[str, Tensor], main_named: dict[str, Tensor], tau: float) -> None:
    for name, tensor in target_named.items():
        tensor.data *= 1.0 - tau
        tensor.data += tau * main_named[name].data

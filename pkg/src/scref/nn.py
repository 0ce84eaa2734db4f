"""Small neural-net building blocks on top of the autodiff tape."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


def xavier_uniform(rng: np.random.Generator, din: int, dout: int) -> np.ndarray:
    a = np.sqrt(6.0 / (din + dout))
    return rng.uniform(-a, a, size=(din, dout))


class Linear:
    def __init__(self, din: int, dout: int, rng: np.random.Generator, zero_init: bool = False):
        w = np.zeros((din, dout)) if zero_init else xavier_uniform(rng, din, dout)
        self.w = ad.param(w)
        self.b = ad.param(np.zeros(dout))

    def __call__(self, x: Tensor) -> Tensor:
        return ad.affine(x, self.w, self.b)

    def named_params(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.w": self.w, f"{prefix}.b": self.b}


_ACTS = {"tanh": ad.tanh, "relu": ad.relu, "softplus": ad.softplus}


class MLP:
    """Plain feed-forward stack; activation between layers, linear output."""

    def __init__(self, dims: list[int], rng: np.random.Generator, activation: str = "relu"):
        if len(dims) < 2:
            raise ValueError("MLP needs at least input and output dims")
        self.layers = [Linear(dims[i], dims[i + 1], rng) for i in range(len(dims) - 1)]
        self.act = _ACTS[activation]

    def __call__(self, x: Tensor) -> Tensor:
        for layer in self.layers[:-1]:
            x = self.act(layer(x))
        return self.layers[-1](x)

    def named_params(self, prefix: str) -> dict[str, Tensor]:
        out = {}
        for i, layer in enumerate(self.layers):
            out.update(layer.named_params(f"{prefix}.l{i}"))
        return out


class LayerNorm:
    def __init__(self, dim: int):
        self.gain = ad.param(np.ones(dim))
        self.bias = ad.param(np.zeros(dim))

    def __call__(self, x: Tensor) -> Tensor:
        return ad.layer_norm(x, self.gain, self.bias)

    def named_params(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.gain": self.gain, f"{prefix}.bias": self.bias}


class AttentionBlock:
    """Pre-norm transformer block: self-attention + feed-forward, both residual."""

    def __init__(self, d_model: int, n_heads: int, mlp_ratio: int, rng: np.random.Generator):
        if d_model % n_heads:
            raise ValueError("d_model must be divisible by n_heads")
        self.d = d_model
        self.heads = n_heads
        self.ln1 = LayerNorm(d_model)
        self.wq = Linear(d_model, d_model, rng)
        self.wk = Linear(d_model, d_model, rng)
        self.wv = Linear(d_model, d_model, rng)
        self.wo = Linear(d_model, d_model, rng)
        self.ln2 = LayerNorm(d_model)
        self.ff1 = Linear(d_model, mlp_ratio * d_model, rng)
        self.ff2 = Linear(mlp_ratio * d_model, d_model, rng)

    def _split(self, x: Tensor, batch: int, tokens: int) -> Tensor:
        x = ad.reshape(x, (batch, tokens, self.heads, self.d // self.heads))
        return ad.transpose(x, (0, 2, 1, 3))

    def __call__(self, x: Tensor) -> Tensor:
        b, t, _ = x.shape
        h = self.ln1(x)
        q, k, v = self._split(self.wq(h), b, t), self._split(self.wk(h), b, t), self._split(self.wv(h), b, t)
        attn = ad.softmax_attention(q, k, v)
        attn = ad.reshape(ad.transpose(attn, (0, 2, 1, 3)), (b, t, self.d))
        x = ad.add(x, self.wo(attn))
        x = ad.add(x, self.ff2(ad.relu(self.ff1(self.ln2(x)))))
        return x

    def named_params(self, prefix: str) -> dict[str, Tensor]:
        out = {}
        for name in ("ln1", "wq", "wk", "wv", "wo", "ln2", "ff1", "ff2"):
            out.update(getattr(self, name).named_params(f"{prefix}.{name}"))
        return out


def attention_stack_forward(blocks: list[AttentionBlock], tokens: Tensor) -> tuple[Tensor, list[Tensor]]:
    """Run a block stack and return (final tokens, per-block hidden states)."""
    hidden = []
    x = tokens
    for block in blocks:
        x = block(x)
        hidden.append(x)
    return x, hidden


def time_features(t: np.ndarray, dim: int) -> np.ndarray:
    """Sinusoidal features of flow time t in [0, 1], shape (batch, dim)."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64)).reshape(-1, 1)
    half = dim // 2
    freqs = np.exp(np.linspace(0.0, np.log(100.0), half))[None, :]
    feats = np.concatenate([np.sin(t * freqs), np.cos(t * freqs)], axis=1)
    if feats.shape[1] < dim:
        feats = np.concatenate([feats, np.zeros((feats.shape[0], dim - feats.shape[1]))], axis=1)
    return feats


def params_list(named: dict[str, Tensor]) -> list[Tensor]:
    return [named[k] for k in sorted(named)]


def params_checksum(named: dict[str, Tensor]) -> bytes:
    """Order-stable digest of parameter bytes; used to verify frozen networks."""
    import hashlib

    h = hashlib.sha256()
    for name in sorted(named):
        h.update(name.encode())
        h.update(named[name].data.tobytes())
    return h.digest()

"""Minimal tape-based reverse-mode autodiff over float64 numpy arrays.

Ops executed inside a `with Tape() as tape:` block are recorded; calling
`tape.gradients(loss, params)` replays the record in exact reverse order and
accumulates gradients additively at fan-out points. Ops executed with no
active tape just compute values (inference mode). Every op checks its output
for NaN/Inf so non-finite values surface immediately instead of propagating.
"""

from __future__ import annotations

import numpy as np


class NonFiniteError(FloatingPointError):
    """An op produced NaN or Inf."""


class TapeError(RuntimeError):
    """Misuse of the gradient tape (non-scalar loss, consumed tape, ...)."""


class Tensor:
    """Wrapper around a float64 ndarray; `is_param` marks trainable leaves."""

    __slots__ = ("data", "is_param")

    def __init__(self, data, is_param: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.is_param = is_param

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, param={self.is_param})"


def param(data) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), is_param=True)


def constant(data) -> Tensor:
    return Tensor(data)


class _Node:
    __slots__ = ("out", "parents", "backward")

    def __init__(self, out, parents, backward):
        self.out = out
        self.parents = parents
        self.backward = backward


_TAPE_STACK: list["Tape"] = []


class Tape:
    """Ordered op record; one backward pass per tape."""

    def __init__(self):
        self._nodes: list[_Node] = []
        self._consumed = False

    def __enter__(self):
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc):
        _TAPE_STACK.pop()
        return False

    def __len__(self):
        return len(self._nodes)

    def gradients(self, loss: Tensor, params: list[Tensor]) -> list[np.ndarray]:
        """Gradients of a scalar loss w.r.t. `params`, aligned with the input list.

        Parameters that do not influence the loss get zero gradients. The tape
        is consumed afterwards; a second call raises.
        """
        if self._consumed:
            raise TapeError("tape already consumed by a previous gradients() call")
        if loss.data.ndim != 0:
            raise TapeError(f"loss must be scalar, got shape {loss.data.shape}")
        self._consumed = True

        wanted = {id(p) for p in params}
        # forward marking pass: which tensors can reach a wanted parameter
        reaches = set(wanted)
        for node in self._nodes:
            if any(id(p) in reaches for p in node.parents):
                reaches.add(id(node.out))

        grads: dict[int, np.ndarray] = {id(loss): np.ones(())}
        leaf: dict[int, np.ndarray] = {}
        for node in reversed(self._nodes):
            g = grads.pop(id(node.out), None)
            if g is None:
                continue
            parent_grads = node.backward(g)
            for p, pg in zip(node.parents, parent_grads):
                if pg is None or id(p) not in reaches:
                    continue
                if id(p) in wanted and p.is_param:
                    store = leaf
                else:
                    store = grads
                prev = store.get(id(p))
                store[id(p)] = pg if prev is None else prev + pg
        # params may also appear as intermediate fan-in when not leaves
        for p in params:
            if id(p) in grads:
                leaf[id(p)] = leaf.get(id(p), 0) + grads[id(p)]
        return [np.asarray(leaf.get(id(p), np.zeros_like(p.data))) for p in params]


def _active_tape():
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def _ensure_finite(data: np.ndarray, op: str) -> np.ndarray:
    if not np.isfinite(data).all():
        raise NonFiniteError(f"op '{op}' produced non-finite values")
    return data


def _make(out_data, op, parents, backward) -> Tensor:
    out = Tensor(_ensure_finite(out_data, op))
    tape = _active_tape()
    if tape is not None:
        if tape._consumed:
            raise TapeError("recording on a consumed tape")
        tape._nodes.append(_Node(out, parents, backward))
    return out


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# primitives


def add(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        return (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape))

    return _make(a.data + b.data, "add", (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        return (_unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape))

    return _make(a.data - b.data, "sub", (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        return (_unbroadcast(g * b.data, a.data.shape), _unbroadcast(g * a.data, b.data.shape))

    return _make(a.data * b.data, "mul", (a, b), backward)


def neg(a: Tensor) -> Tensor:
    return _make(-a.data, "neg", (a,), lambda g: (-g,))


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _make(a.data * c, "scale", (a,), lambda g: (g * c,))


def add_const(a: Tensor, c) -> Tensor:
    return _make(a.data + c, "add_const", (a,), lambda g: (_unbroadcast(g, a.data.shape),))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data @ b.data

    def backward(g):
        bt = np.swapaxes(b.data, -1, -2)
        at = np.swapaxes(a.data, -1, -2)
        ga = _unbroadcast(g @ bt, a.data.shape)
        gb = _unbroadcast(at @ g, b.data.shape)
        return (ga, gb)

    return _make(out, "matmul", (a, b), backward)


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Fused y = x @ w + b with x of shape (..., din)."""
    out = x.data @ w.data + b.data

    def backward(g):
        g2 = g.reshape(-1, g.shape[-1])
        x2 = x.data.reshape(-1, x.data.shape[-1])
        return (g @ w.data.T, x2.T @ g2, g2.sum(axis=0))

    return _make(out, "affine", (x, w, b), backward)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return _make(out, "tanh", (a,), lambda g: (g * (1.0 - out * out),))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _make(np.where(mask, a.data, 0.0), "relu", (a,), lambda g: (g * mask,))


def softplus(a: Tensor) -> Tensor:
    out = np.logaddexp(0.0, a.data)

    def backward(g):
        return (g / (1.0 + np.exp(-a.data)),)

    return _make(out, "softplus", (a,), backward)


def exp(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        out = np.exp(a.data)
    return _make(out, "exp", (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.log(a.data)
    return _make(out, "log", (a,), lambda g: (g / a.data,))


def minimum(a: Tensor, b: Tensor) -> Tensor:
    take_a = a.data <= b.data  # ties route to the left operand

    def backward(g):
        return (_unbroadcast(g * take_a, a.data.shape), _unbroadcast(g * ~take_a, b.data.shape))

    return _make(np.minimum(a.data, b.data), "minimum", (a, b), backward)


def sum_axis(a: Tensor, axis: int, keepdims: bool = False) -> Tensor:
    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape).copy(),)

    return _make(a.data.sum(axis=axis, keepdims=keepdims), "sum_axis", (a,), backward)


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size

    def backward(g):
        return (np.full(a.data.shape, float(g) / n),)

    return _make(np.asarray(a.data.mean()), "mean_all", (a,), backward)


def mse(a: Tensor, b: Tensor) -> Tensor:
    """Mean squared error over all entries; operands must have equal shapes."""
    if a.data.shape != b.data.shape:
        raise ValueError(f"mse shape mismatch {a.data.shape} vs {b.data.shape}")
    diff = a.data - b.data
    n = diff.size

    def backward(g):
        gg = (2.0 * float(g) / n) * diff
        return (gg, -gg)

    return _make(np.asarray((diff * diff).mean()), "mse", (a, b), backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-6) -> Tensor:
    """Normalization over the last axis with learned gain/bias."""
    mu = x.data.mean(axis=-1, keepdims=True)
    var = ((x.data - mu) ** 2).mean(axis=-1, keepdims=True)
    sigma = np.sqrt(var + eps)
    xhat = (x.data - mu) / sigma
    out = xhat * gain.data + bias.data

    def backward(g):
        dxhat = g * gain.data
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        dx = (dxhat - m1 - xhat * m2) / sigma
        axes = tuple(range(g.ndim - 1))
        return (dx, (g * xhat).sum(axis=axes), g.sum(axis=axes))

    return _make(out, "layer_norm", (x, gain, bias), backward)


def softmax_attention(q: Tensor, k: Tensor, v: Tensor) -> Tensor:
    """Fused scaled-dot-product attention; inputs shaped (..., T, head_dim)."""
    dh = q.data.shape[-1]
    sc = 1.0 / np.sqrt(dh)
    scores = (q.data @ np.swapaxes(k.data, -1, -2)) * sc
    scores = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(scores)
    attn = e / e.sum(axis=-1, keepdims=True)
    out = attn @ v.data

    def backward(g):
        dv = np.swapaxes(attn, -1, -2) @ g
        dattn = g @ np.swapaxes(v.data, -1, -2)
        ds = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True))
        dq = (ds @ k.data) * sc
        dk = (np.swapaxes(ds, -1, -2) @ q.data) * sc
        return (dq, dk, dv)

    return _make(out, "softmax_attention", (q, k, v), backward)


def concat(tensors: list[Tensor], axis: int) -> Tensor:
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(np.concatenate([t.data for t in tensors], axis=axis), "concat", tuple(tensors), backward)


def slice_axis(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    key = [slice(None)] * a.data.ndim
    key[axis] = slice(start, stop)
    key = tuple(key)

    def backward(g):
        full = np.zeros_like(a.data)
        full[key] = g
        return (full,)

    return _make(a.data[key].copy(), "slice", (a,), backward)


def reshape(a: Tensor, shape) -> Tensor:
    return _make(a.data.reshape(shape), "reshape", (a,), lambda g: (g.reshape(a.data.shape),))


def transpose(a: Tensor, axes) -> Tensor:
    inv = np.argsort(axes)
    return _make(a.data.transpose(axes), "transpose", (a,), lambda g: (g.transpose(inv),))

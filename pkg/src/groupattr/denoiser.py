"""Small eps-prediction MLP with analytic gradients and an AdamW optimizer.

The network consumes [x_t, sinusoidal time features, condition vector]
and predicts the noise that produced x_t.  Parameters live in a single
flat float64 vector so that training, unlearning, checkpointing and
finite-difference checks all share one representation.  Forward and
backward passes are written directly in numpy; reverse-mode gradients
are exact up to floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .diffusion import Schedule, forward_marginal
from .seeding import content_rng

ACTIVATIONS = ("silu", "relu")

GRAD_CLIP_NORM = 1.0


@dataclass(frozen=True)
class Architecture:
    """Shape descriptor for the eps-prediction MLP."""

    input_dim: int
    hidden_dims: tuple[int, ...]
    time_embed_dim: int
    cond_dim: int = 0
    activation: str = "silu"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if not self.hidden_dims or any(h < 1 for h in self.hidden_dims):
            raise ValueError("hidden_dims must be non-empty positive integers")
        if self.time_embed_dim < 2 or self.time_embed_dim % 2 != 0:
            raise ValueError("time_embed_dim must be an even integer >= 2")
        if self.cond_dim < 0:
            raise ValueError("cond_dim must be >= 0")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def feature_dim(self) -> int:
        return self.input_dim + self.time_embed_dim + self.cond_dim

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.feature_dim, *self.hidden_dims, self.input_dim)

    @property
    def param_count(self) -> int:
        dims = self.layer_dims
        return sum(dims[i] * dims[i + 1] + dims[i + 1] for i in range(len(dims) - 1))

    def to_dict(self) -> dict:
        return {
            "activation": self.activation,
            "cond_dim": self.cond_dim,
            "hidden_dims": list(self.hidden_dims),
            "input_dim": self.input_dim,
            "time_embed_dim": self.time_embed_dim,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Architecture":
        return cls(
            input_dim=int(d["input_dim"]),
            hidden_dims=tuple(d["hidden_dims"]),
            time_embed_dim=int(d["time_embed_dim"]),
            cond_dim=int(d["cond_dim"]),
            activation=str(d["activation"]),
        )


@dataclass(frozen=True)
class DenoiserParams:
    """Immutable flat parameter vector plus its architecture."""

    arch: Architecture
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size != self.arch.param_count:
            raise ValueError(
                f"expected {self.arch.param_count} parameters, got shape {w.shape}"
            )
        if not np.all(np.isfinite(w)):
            raise ValueError("weights contain non-finite entries")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def param_count(self) -> int:
        return self.arch.param_count

    def with_weights(self, w: np.ndarray) -> "DenoiserParams":
        return DenoiserParams(self.arch, np.array(w, dtype=np.float64))


@dataclass(frozen=True)
class OptimizerState:
    """AdamW state: moment estimates and hyperparameters."""

    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int
    lr: float
    weight_decay: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.first_moment.shape != self.second_moment.shape:
            raise ValueError("moment vectors must have identical shape")
        if not self.lr > 0.0:
            raise ValueError("lr must be positive")
        if self.weight_decay < 0.0:
            raise ValueError("weight_decay must be non-negative")


def init_optimizer(p: DenoiserParams, lr: float, weight_decay: float = 1e-4) -> OptimizerState:
    n = p.param_count
    return OptimizerState(np.zeros(n), np.zeros(n), 0, lr, weight_decay)


def time_features(t, num_steps: int, embed_dim: int) -> np.ndarray:
    """Sinusoidal features with frequencies geometric from 1 to T/2.

    Accepts a scalar timestep or a vector of per-row timesteps; returns
    shape (embed_dim,) or (len(t), embed_dim) respectively.
    """
    half = embed_dim // 2
    freqs = np.geomspace(1.0, max(num_steps / 2.0, 1.0), half)
    t_arr = np.asarray(t, dtype=np.float64)
    angles = 2.0 * math.pi * np.multiply.outer(t_arr, freqs) / num_steps
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=-1)


def _unpack(arch: Architecture, flat: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    dims = arch.layer_dims
    layers = []
    off = 0
    for i in range(len(dims) - 1):
        m, n = dims[i], dims[i + 1]
        w = flat[off : off + m * n].reshape(n, m)
        off += m * n
        b = flat[off : off + n]
        off += n
        layers.append((w, b))
    return layers


def init_network(arch: Architecture, seed: int) -> DenoiserParams:
    """Fan-in-scaled uniform weights, zero biases, deterministic in seed."""
    rng = np.random.default_rng(seed)
    chunks = []
    dims = arch.layer_dims
    for i in range(len(dims) - 1):
        m, n = dims[i], dims[i + 1]
        bound = 1.0 / math.sqrt(m)
        chunks.append(rng.uniform(-bound, bound, size=m * n))
        chunks.append(np.zeros(n))
    return DenoiserParams(arch, np.concatenate(chunks))


def _silu(z):
    sig = 1.0 / (1.0 + np.exp(-z))
    return z * sig


def _silu_grad(z):
    sig = 1.0 / (1.0 + np.exp(-z))
    return sig * (1.0 + z * (1.0 - sig))


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_grad(z):
    return (z > 0.0).astype(np.float64)


_ACT = {"silu": (_silu, _silu_grad), "relu": (_relu, _relu_grad)}


def _assemble_features(
    arch: Architecture,
    xt: np.ndarray,
    t,
    num_steps: int,
    cond: np.ndarray | None,
) -> np.ndarray:
    tf = time_features(t, num_steps, arch.time_embed_dim)
    if tf.ndim == 1 and xt.ndim == 2:
        tf = np.broadcast_to(tf, (xt.shape[0], arch.time_embed_dim))
    parts = [xt, tf]
    if arch.cond_dim > 0:
        if cond is None:
            raise ValueError("conditional network requires a condition vector")
        cond = np.asarray(cond, dtype=np.float64)
        if cond.shape[-1] != arch.cond_dim:
            raise ValueError(f"condition dim {cond.shape[-1]} != {arch.cond_dim}")
        if cond.ndim == 1 and xt.ndim == 2:
            cond = np.broadcast_to(cond, (xt.shape[0], arch.cond_dim))
        parts.append(cond)
    elif cond is not None:
        raise ValueError("unconditional network, but a condition was given")
    return np.concatenate(parts, axis=-1)


def forward_batch(
    p: DenoiserParams,
    xt: np.ndarray,
    t,
    num_steps: int,
    cond: np.ndarray | None = None,
    want_cache: bool = False,
):
    """Batched forward pass.

    ``xt`` has shape (B, input_dim); ``t`` is a scalar or length-B
    vector; ``cond`` is None, a single vector, or a (B, cond_dim) matrix.
    With ``want_cache`` the returned cache supports ``backward_batch``.
    """
    xt = np.asarray(xt, dtype=np.float64)
    if xt.ndim != 2 or xt.shape[1] != p.arch.input_dim:
        raise ValueError(f"xt must have shape (B, {p.arch.input_dim})")
    feats = _assemble_features(p.arch, xt, t, num_steps, cond)
    act, act_grad = _ACT[p.arch.activation]
    layers = _unpack(p.arch, p.weights)

    a = feats
    pre, post = [], [feats]
    for i, (w, b) in enumerate(layers):
        z = a @ w.T + b
        if i < len(layers) - 1:
            pre.append(z)
            a = act(z)
            post.append(a)
        else:
            a = z
    if not want_cache:
        return a
    return a, (layers, pre, post, act_grad)


def backward_batch(p: DenoiserParams, cache, grad_out: np.ndarray) -> np.ndarray:
    """Flat parameter gradient given d(loss)/d(output) rows."""
    layers, pre, post, act_grad = cache
    grads = [None] * len(layers)
    g = np.asarray(grad_out, dtype=np.float64)
    for i in range(len(layers) - 1, -1, -1):
        w, _ = layers[i]
        grads[i] = (g.T @ post[i], g.sum(axis=0))
        if i > 0:
            g = (g @ w) * act_grad(pre[i - 1])
    flat = np.empty(p.param_count)
    off = 0
    for gw, gb in grads:
        flat[off : off + gw.size] = gw.ravel()
        off += gw.size
        flat[off : off + gb.size] = gb
        off += gb.size
    return flat


def predict_eps(
    p: DenoiserParams,
    xt: np.ndarray,
    t: int,
    num_steps: int,
    cond: np.ndarray | None = None,
) -> np.ndarray:
    """Predicted noise for a single input; pure in all arguments."""
    xt = np.asarray(xt, dtype=np.float64)
    if xt.shape != (p.arch.input_dim,):
        raise ValueError(f"xt must have shape ({p.arch.input_dim},), got {xt.shape}")
    if not 1 <= int(t) <= num_steps:
        raise ValueError(f"timestep {t} outside [1, {num_steps}]")
    return forward_batch(p, xt[None, :], int(t), num_steps, cond)[0]


class NetworkDenoiser:
    """Adapter giving DenoiserParams the (xt, t, cond) -> eps call shape."""

    def __init__(self, params: DenoiserParams, num_steps: int):
        self.params = params
        self.num_steps = num_steps

    @property
    def input_dim(self) -> int:
        return self.params.arch.input_dim

    def __call__(self, xt: np.ndarray, t: int, cond: np.ndarray | None = None) -> np.ndarray:
        return predict_eps(self.params, xt, t, self.num_steps, cond)


def draw_noising(
    rng_seed: int,
    x0: np.ndarray,
    cond: np.ndarray | None,
    t_lo: int,
    t_hi: int,
) -> tuple[int, np.ndarray]:
    """Per-item (t, eps) draw keyed by item content; see content_rng."""
    rng = content_rng(rng_seed, x0, cond)
    t = int(rng.integers(t_lo, t_hi + 1))
    return t, rng.standard_normal(x0.shape[0])


def loss_and_grad(
    p: DenoiserParams,
    batch: Sequence[tuple[np.ndarray, np.ndarray | None]],
    s: Schedule,
    rng_seed: int,
) -> tuple[float, np.ndarray]:
    """Mean squared eps-prediction error over a batch, with gradient.

    Each item draws a uniform timestep and a Gaussian noise vector
    deterministically from (rng_seed, item content), the item is noised
    through the forward marginal, and the loss is the batch mean of the
    squared prediction residual norm.
    """
    if len(batch) == 0:
        raise ValueError("batch must be non-empty")
    xts, ts, epss, conds = [], [], [], []
    for x0, cond in batch:
        x0 = np.asarray(x0, dtype=np.float64)
        t, eps = draw_noising(rng_seed, x0, cond, 1, s.num_steps)
        xts.append(forward_marginal(s, x0, t, eps))
        ts.append(t)
        epss.append(eps)
        conds.append(cond)
    xt = np.stack(xts)
    eps = np.stack(epss)
    cond_mat = _stack_conds(p.arch, conds)
    out, cache = forward_batch(p, xt, np.array(ts), s.num_steps, cond_mat, want_cache=True)
    resid = out - eps
    loss = float(np.mean(np.sum(resid**2, axis=1)))
    grad = backward_batch(p, cache, 2.0 * resid / len(batch))
    return loss, grad


def _stack_conds(arch: Architecture, conds: list) -> np.ndarray | None:
    if arch.cond_dim == 0:
        if any(c is not None for c in conds):
            raise ValueError("unconditional network, but conditions were given")
        return None
    if any(c is None for c in conds):
        raise ValueError("conditional network requires a condition per item")
    return np.stack([np.asarray(c, dtype=np.float64) for c in conds])


def clip_gradient(grad: np.ndarray, max_norm: float = GRAD_CLIP_NORM) -> np.ndarray:
    """Rescale so the global norm is at most ``max_norm``."""
    norm = float(np.linalg.norm(grad))
    if norm > max_norm:
        return grad * (max_norm / norm)
    return grad


def optimizer_step(
    p: DenoiserParams,
    st: OptimizerState,
    grad: np.ndarray,
) -> tuple[DenoiserParams, OptimizerState]:
    """One AdamW update with global-norm gradient clipping at 1.0.

    The gradient is rescaled so its norm is at most 1, then the
    bias-corrected moment update is applied together with decoupled
    weight decay.
    """
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != p.weights.shape:
        raise ValueError(f"gradient shape {grad.shape} != {p.weights.shape}")
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("gradient contains non-finite entries")

    grad = clip_gradient(grad)

    step = st.step_count + 1
    m = st.beta1 * st.first_moment + (1.0 - st.beta1) * grad
    v = st.beta2 * st.second_moment + (1.0 - st.beta2) * grad**2
    m_hat = m / (1.0 - st.beta1**step)
    v_hat = v / (1.0 - st.beta2**step)
    w = p.weights * (1.0 - st.lr * st.weight_decay)
    w = w - st.lr * m_hat / (np.sqrt(v_hat) + st.epsilon)
    new_state = replace(st, first_moment=m, second_moment=v, step_count=step)
    return p.with_weights(w), new_state

"""Unlearning operators that approximate leave-one-group-out retraining.

Three forget objectives share a common preservation term:

- ``retrack``: noised forget samples are redirected toward the
  importance-weighted posterior-mean target over the retain set,
  truncated to the K nearest neighbors under the forward-process
  Gaussian kernel.  With K equal to the retain size the target is
  exactly the retain-set empirical denoiser.
- ``esd``: negative guidance away from the frozen model's
  group-conditioned prediction, using a jointly trained null-condition
  branch as the unconditional reference.
- ``cond_anchor``: conditional redirection that matches the frozen
  model's prediction under an anchor condition keeping the forget
  group's content block while swapping in a retain group's descriptor
  block.

Loss weighting follows two conventions, selected by method:
``lambda_forget * L_forget + L_preserve`` for retrack/esd and
``L_forget + lambda_pres * L_preserve`` for cond_anchor.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import GroupedDataset
from .denoiser import (
    DenoiserParams,
    backward_batch,
    content_rng,
    forward_batch,
    init_optimizer,
    optimizer_step,
)
from .diffusion import Schedule, forward_marginal
from .seeding import derive_seed, rng_for

UNLEARN_METHODS = ("retrack", "esd", "cond_anchor")


@dataclass(frozen=True)
class UnlearnConfig:
    method: str
    lr: float
    steps_or_epochs: int
    seed: int
    lambda_forget: float = 0.03
    lambda_pres: float = 2.0
    K: int = 10
    kl_cap: float = 1.0
    guidance_weight: float = 5.0
    tau: float = 2.0
    eta_mix: float = 0.1
    timestep_range: tuple[int, int] = (1, 1)
    batch_size: int = 32
    cond_dropout: float = 0.1

    def __post_init__(self):
        if self.method not in UNLEARN_METHODS:
            raise ValueError(f"unknown unlearning method {self.method!r}")
        if not self.lr > 0.0:
            raise ValueError("lr must be positive")
        if self.steps_or_epochs < 0:
            raise ValueError("steps_or_epochs must be >= 0")
        if self.lambda_forget < 0.0 or self.lambda_pres < 0.0:
            raise ValueError("loss weights must be non-negative")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.kl_cap < 0.0:
            raise ValueError("kl_cap must be non-negative")
        if not 0.0 <= self.eta_mix <= 1.0:
            raise ValueError("eta_mix must be in [0, 1]")
        if not self.tau > 0.0:
            raise ValueError("tau must be positive")
        lo, hi = self.timestep_range
        if not 1 <= lo <= hi:
            raise ValueError(f"invalid timestep range {self.timestep_range}")


def default_timestep_range(num_steps: int) -> tuple[int, int]:
    """Upper-half range [T/2, 0.975 T], scaled from the reference setup."""
    return (max(1, num_steps // 2), max(1, round(0.975 * num_steps)))


def importance_weights(retain: np.ndarray, xt: np.ndarray, t: int, s: Schedule) -> np.ndarray:
    """Posterior weights w_i ~ exp(-|xt - sqrt(abar_t) x_i|^2 / (2 sigma_t^2)).

    Normalized to sum to one via log-sum-exp; a uniform prior over the
    retain set is implicit.
    """
    retain = np.atleast_2d(np.asarray(retain, dtype=np.float64))
    if retain.shape[0] == 0:
        raise ValueError("retain set must be non-empty")
    xt = np.asarray(xt, dtype=np.float64)
    root = math.sqrt(s.alpha_bar(t))
    sigma = s.sigma(t)
    logits = -np.sum((xt[None, :] - root * retain) ** 2, axis=1) / (2.0 * sigma**2)
    logits -= logits.max()
    w = np.exp(logits)
    return w / w.sum()


def retain_mixture_logpdf(points: np.ndarray, xt: np.ndarray, t: int, s: Schedule) -> float:
    """log of the timestep-t marginal mixture (1/n) sum_i q_t(xt | x_i)."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    xt = np.asarray(xt, dtype=np.float64)
    root = math.sqrt(s.alpha_bar(t))
    var = s.sigma(t) ** 2
    d = xt.shape[0]
    logs = (
        -np.sum((xt[None, :] - root * points) ** 2, axis=1) / (2.0 * var)
        - 0.5 * d * math.log(2.0 * math.pi * var)
    )
    m = logs.max()
    return float(m + math.log(np.exp(logs - m).sum()) - math.log(points.shape[0]))


def retrack_target(retain: np.ndarray, xt: np.ndarray, t: int, K: int, s: Schedule) -> np.ndarray:
    """Importance-weighted eps target truncated to the K nearest retain points.

    Nearest is measured by |xt - sqrt(abar_t) x_i| (equivalently by
    largest weight); ties break toward the lower sample index.  Weights
    are renormalized over the kept subset.
    """
    retain = np.atleast_2d(np.asarray(retain, dtype=np.float64))
    n = retain.shape[0]
    if not 1 <= K <= n:
        raise ValueError(f"K must be in [1, {n}], got {K}")
    xt = np.asarray(xt, dtype=np.float64)
    root = math.sqrt(s.alpha_bar(t))
    sigma = s.sigma(t)
    diffs = xt[None, :] - root * retain
    dist2 = np.sum(diffs**2, axis=1)
    keep = np.argsort(dist2, kind="stable")[:K]
    logits = -dist2[keep] / (2.0 * sigma**2)
    logits -= logits.max()
    w = np.exp(logits)
    w /= w.sum()
    return (w @ diffs[keep]) / sigma


def _uncond_for(p: DenoiserParams, dim_hint: int | None = None) -> np.ndarray | None:
    # Null condition realizing the unconditional branch of a conditional net.
    if p.arch.cond_dim == 0:
        return None
    return np.zeros(p.arch.cond_dim)


def _noise_batch(batch, cfg: UnlearnConfig, s: Schedule, rng_seed: int):
    """Per-item (t, eps, xt) draws over the configured timestep range."""
    lo, hi = cfg.timestep_range
    if hi > s.num_steps:
        raise ValueError(f"timestep range {cfg.timestep_range} exceeds T={s.num_steps}")
    ts, xts, items = [], [], []
    for x0, cond in batch:
        x0 = np.asarray(x0, dtype=np.float64)
        rng = content_rng(rng_seed, x0, cond)
        t = int(rng.integers(lo, hi + 1))
        eps = rng.standard_normal(x0.shape[0])
        ts.append(t)
        xts.append(forward_marginal(s, x0, t, eps))
        items.append((x0, cond, rng))
    return np.array(ts), np.stack(xts), items


def retrack_forget_loss(
    p: DenoiserParams,
    forget_batch: Sequence[tuple[np.ndarray, np.ndarray | None]],
    retain: np.ndarray,
    cfg: UnlearnConfig,
    s: Schedule,
    rng_seed: int | None = None,
) -> tuple[float, np.ndarray]:
    """Redirection loss toward truncated importance-weighted targets.

    Per-sample squared deviations are capped at ``kl_cap`` (trust-region
    clipping): a sample whose raw loss exceeds the cap contributes the
    cap value and no gradient.
    """
    if len(forget_batch) == 0:
        raise ValueError("forget batch must be non-empty")
    retain = np.atleast_2d(np.asarray(retain, dtype=np.float64))
    if retain.shape[0] == 0:
        raise ValueError("retain set must be non-empty")
    seed = cfg.seed if rng_seed is None else rng_seed
    ts, xts, _ = _noise_batch(forget_batch, cfg, s, seed)
    targets = np.stack(
        [retrack_target(retain, xts[i], int(ts[i]), cfg.K, s) for i in range(len(ts))]
    )
    cond = _uncond_for(p)
    cond_mat = None if cond is None else np.broadcast_to(cond, (len(ts), p.arch.cond_dim))
    out, cache = forward_batch(p, xts, ts, s.num_steps, cond_mat, want_cache=True)
    resid = out - targets
    raw = np.sum(resid**2, axis=1)
    capped = np.minimum(raw, cfg.kl_cap)
    loss = float(np.mean(capped))
    # Zero gradient where the cap is active.
    mask = (raw < cfg.kl_cap).astype(np.float64)[:, None]
    grad = backward_batch(p, cache, 2.0 * resid * mask / len(ts))
    return loss, grad


def esd_forget_loss(
    p: DenoiserParams,
    p_full_frozen: DenoiserParams,
    forget_batch: Sequence[tuple[np.ndarray, np.ndarray | None]],
    cfg: UnlearnConfig,
    s: Schedule,
    rng_seed: int | None = None,
) -> tuple[float, np.ndarray]:
    """Negative-guidance loss toward eps_u - w (eps_c - eps_u).

    Both guidance branches come from the frozen reference model: the
    group-conditioned prediction and the null-condition prediction.
    The trained model is evaluated under the group condition.
    """
    if p.arch.cond_dim == 0 or p_full_frozen.arch.cond_dim == 0:
        raise ValueError("esd requires conditional models (cond_dim > 0)")
    if len(forget_batch) == 0:
        raise ValueError("forget batch must be non-empty")
    seed = cfg.seed if rng_seed is None else rng_seed
    ts, xts, _ = _noise_batch(forget_batch, cfg, s, seed)
    conds = np.stack([np.asarray(c, dtype=np.float64) for _, c in forget_batch])
    null = np.zeros((len(ts), p.arch.cond_dim))
    eps_c = forward_batch(p_full_frozen, xts, ts, s.num_steps, conds)
    eps_u = forward_batch(p_full_frozen, xts, ts, s.num_steps, null)
    target = eps_u - cfg.guidance_weight * (eps_c - eps_u)
    out, cache = forward_batch(p, xts, ts, s.num_steps, conds, want_cache=True)
    resid = out - target
    loss = float(np.mean(np.sum(resid**2, axis=1)))
    grad = backward_batch(p, cache, 2.0 * resid / len(ts))
    return loss, grad


def preservation_loss(
    p: DenoiserParams,
    p_full_frozen: DenoiserParams,
    retain_batch: Sequence[tuple[np.ndarray, np.ndarray | None]],
    s: Schedule,
    seed: int,
) -> tuple[float, np.ndarray]:
    """Score-matching distillation toward the frozen full model.

    Shared (t, eps) draws over the full timestep range; the loss is the
    batch mean of |eps_p - eps_full|^2 on retain samples.
    """
    if len(retain_batch) == 0:
        raise ValueError("retain batch must be non-empty")
    ts, xts, conds = [], [], []
    for x0, cond in retain_batch:
        x0 = np.asarray(x0, dtype=np.float64)
        rng = content_rng(seed, x0, cond)
        t = int(rng.integers(1, s.num_steps + 1))
        eps = rng.standard_normal(x0.shape[0])
        ts.append(t)
        xts.append(forward_marginal(s, x0, t, eps))
        conds.append(cond)
    ts = np.array(ts)
    xts = np.stack(xts)
    cond_mat = None
    if p.arch.cond_dim > 0:
        cond_mat = np.stack([np.asarray(c, dtype=np.float64) for c in conds])
    ref = forward_batch(p_full_frozen, xts, ts, s.num_steps, cond_mat)
    out, cache = forward_batch(p, xts, ts, s.num_steps, cond_mat, want_cache=True)
    resid = out - ref
    loss = float(np.mean(np.sum(resid**2, axis=1)))
    grad = backward_batch(p, cache, 2.0 * resid / len(ts))
    return loss, grad


@dataclass(frozen=True)
class AnchorSelector:
    """Weighted style selection over retain groups.

    ``prototypes`` are unit-normalized per-group descriptor embeddings;
    selection follows (1 - eta) * softmax(tau * e_f . e_s) + eta *
    uniform, restricted to groups other than the forget group.  The
    synthesized anchor keeps the forget group's content block and swaps
    in the selected group's descriptor block.
    """

    prototypes: np.ndarray
    tau: float
    eta_mix: float
    cond_vectors: np.ndarray
    content_dim: int

    @classmethod
    def from_dataset(cls, d: GroupedDataset, tau: float = 2.0, eta_mix: float = 0.1) -> "AnchorSelector":
        if d.cond_vectors is None:
            raise ValueError("dataset has no condition vectors")
        conds = np.stack(d.cond_vectors)
        desc = conds[:, d.n_groups :]
        norms = np.linalg.norm(desc, axis=1)
        if np.any(norms == 0.0):
            raise FloatingPointError("zero-norm descriptor vector")
        return cls(desc / norms[:, None], tau, eta_mix, conds, d.n_groups)

    def selection_probs(self, forget_group: int) -> tuple[np.ndarray, np.ndarray]:
        """(retain group indices, probabilities) for the forget group."""
        n = self.prototypes.shape[0]
        if n < 2:
            raise ValueError("need at least 2 groups")
        retain_idx = np.array([i for i in range(n) if i != forget_group])
        sims = self.prototypes[retain_idx] @ self.prototypes[forget_group]
        logits = self.tau * sims
        logits -= logits.max()
        soft = np.exp(logits)
        soft /= soft.sum()
        probs = (1.0 - self.eta_mix) * soft + self.eta_mix / len(retain_idx)
        return retain_idx, probs

    def anchor_condition(self, forget_group: int, style_group: int) -> np.ndarray:
        anchor = self.cond_vectors[style_group].copy()
        anchor[: self.content_dim] = self.cond_vectors[forget_group][: self.content_dim]
        return anchor


def anchor_select(sel: AnchorSelector, forget_group: int, seed: int) -> tuple[int, np.ndarray]:
    """Sample a retain style and synthesize the anchor condition."""
    retain_idx, probs = sel.selection_probs(forget_group)
    rng = rng_for(seed, "anchor")
    chosen = int(retain_idx[rng.choice(len(retain_idx), p=probs)])
    return chosen, sel.anchor_condition(forget_group, chosen)


def conditional_forget_loss(
    p: DenoiserParams,
    p_full_frozen: DenoiserParams,
    forget_batch: Sequence[tuple[np.ndarray, np.ndarray | None]],
    forget_group: int,
    sel: AnchorSelector,
    cfg: UnlearnConfig,
    s: Schedule,
    rng_seed: int | None = None,
) -> tuple[float, np.ndarray]:
    """Anchor-redirection loss |eps_p(xt, t, c_f) - eps_full(xt, t, c_a)|^2.

    The anchor latent equals the forget latent; only the conditioning
    signal changes, with c_a drawn per item from the weighted style
    selection distribution.
    """
    if p.arch.cond_dim == 0:
        raise ValueError("cond_anchor requires a conditional model")
    if len(forget_batch) == 0:
        raise ValueError("forget batch must be non-empty")
    seed = cfg.seed if rng_seed is None else rng_seed
    ts, xts, items = _noise_batch(forget_batch, cfg, s, seed)
    conds_f = np.stack([np.asarray(c, dtype=np.float64) for _, c in forget_batch])
    anchors = []
    for _, _, rng in items:
        anchor_seed = int(rng.integers(1 << 62))
        _, c_a = anchor_select(sel, forget_group, anchor_seed)
        anchors.append(c_a)
    anchors = np.stack(anchors)
    ref = forward_batch(p_full_frozen, xts, ts, s.num_steps, anchors)
    out, cache = forward_batch(p, xts, ts, s.num_steps, conds_f, want_cache=True)
    resid = out - ref
    loss = float(np.mean(np.sum(resid**2, axis=1)))
    grad = backward_batch(p, cache, 2.0 * resid / len(ts))
    return loss, grad


@dataclass
class UnlearnRun:
    params: DenoiserParams
    steps: int
    forget_losses: list[float]
    preserve_losses: list[float]
    wall_seconds: float


def unlearn(
    p_full: DenoiserParams,
    d: GroupedDataset,
    k: int,
    cfg: UnlearnConfig,
    s: Schedule,
) -> UnlearnRun:
    """Fine-tune from the full model to remove group k's influence.

    Each optimizer step draws one retain batch and one forget batch.
    The composite gradient follows the per-method weighting convention;
    the optimizer is AdamW without weight decay.
    """
    if not 0 <= k < d.n_groups:
        raise ValueError(f"group index {k} outside [0, {d.n_groups})")
    if cfg.method in ("esd", "cond_anchor") and p_full.arch.cond_dim == 0:
        raise ValueError(f"{cfg.method} requires a conditional model")

    start = time.perf_counter()
    if cfg.steps_or_epochs == 0:
        return UnlearnRun(p_full, 0, [], [], time.perf_counter() - start)

    retain_x, retain_lab = d.labeled_samples(exclude=k)
    forget_x = d.groups[k]
    conditional = p_full.arch.cond_dim > 0
    sel = AnchorSelector.from_dataset(d, cfg.tau, cfg.eta_mix) if cfg.method == "cond_anchor" else None

    params = p_full
    opt = init_optimizer(params, cfg.lr, weight_decay=0.0)
    forget_losses, preserve_losses = [], []
    for step in range(cfg.steps_or_epochs):
        rb = rng_for(cfg.seed, "retain", step).choice(
            len(retain_x), size=min(cfg.batch_size, len(retain_x)), replace=False
        )
        fb = rng_for(cfg.seed, "forget", step).choice(
            len(forget_x), size=min(cfg.batch_size, len(forget_x)), replace=False
        )
        retain_batch = _conditioned(d, retain_x[rb], retain_lab[rb], conditional, cfg, step)
        forget_batch = [
            (forget_x[i], d.cond_of(k) if conditional else None) for i in fb
        ]

        fseed = derive_seed(cfg.seed, "floss", step)
        if cfg.method == "retrack":
            lf, gf = retrack_forget_loss(params, forget_batch, retain_x, cfg, s, fseed)
        elif cfg.method == "esd":
            lf, gf = esd_forget_loss(params, p_full, forget_batch, cfg, s, fseed)
        else:
            lf, gf = conditional_forget_loss(params, p_full, forget_batch, k, sel, cfg, s, fseed)
        lp, gp = preservation_loss(params, p_full, retain_batch, s, derive_seed(cfg.seed, "ploss", step))

        if cfg.method == "cond_anchor":
            grad = gf + cfg.lambda_pres * gp
        else:
            grad = cfg.lambda_forget * gf + gp
        params, opt = optimizer_step(params, opt, grad)
        forget_losses.append(lf)
        preserve_losses.append(lp)

    return UnlearnRun(params, cfg.steps_or_epochs, forget_losses, preserve_losses,
                      time.perf_counter() - start)


def _conditioned(d, xs, labels, conditional, cfg, step) -> list:
    if not conditional:
        return [(x, None) for x in xs]
    drop = rng_for(cfg.seed, "dropout", step).random(len(xs)) < cfg.cond_dropout
    null = d.null_condition()
    return [
        (x, null if drop[i] else d.cond_vectors[lab])
        for i, (x, lab) in enumerate(zip(xs, labels))
    ]

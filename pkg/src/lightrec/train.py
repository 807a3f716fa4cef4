"""BPR training: triple sampling, analytic gradients, Adam updates.

The combined embeddings are linear in layer0 (combined = P @ layer0 with
P = sum_k alpha_k A^k), so the backward pass applies the transposed
propagation pipeline to the loss gradient taken at the output side and
adds the L2 term. With diffusion in the forward pass, the diffusion
Jacobian transpose is applied first.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .data import InteractionDataset
from .diffusion import DiffusionConfig, appnp_transpose, diffuse_state
from .graph import (DEFAULT_SCHEME, InteractionGraph, NormalizedAdjacency,
                    build_graph, normalize, scheme_by_name, spmv_transpose)
from .model import EmbeddingState, LayerWeights, init_embeddings, propagate

logger = logging.getLogger(__name__)


class NumericError(RuntimeError):
    """Raised when training produces non-finite numbers."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1000
    lr: float = 0.001
    reg: float = 0.0001          # L2 coefficient on layer-0 embeddings
    batch_size: int = 1024
    layers: int = 3
    scheme: str = DEFAULT_SCHEME
    dim: int = 64
    seed: int = 0
    eval_every: int = 20         # metric cadence in epochs; 0 disables
    eval_cutoff: int = 20
    diffusion: DiffusionConfig | None = None

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if self.reg < 0:
            raise ValueError(f"reg must be >= 0, got {self.reg}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")


class TripleSampler:
    """Uniform BPR sampling over train interactions with rejection negatives."""

    def __init__(self, g: InteractionGraph):
        self.num_items = g.num_items
        pairs = g.train_pairs
        full = np.flatnonzero(g.user_degrees >= g.num_items)
        if full.size:
            logger.warning(
                "%d user(s) interact with every item; skipped in sampling",
                full.size)
            keep = ~np.isin(pairs[:, 0], full)
            pairs = pairs[keep]
        if pairs.size == 0:
            raise ValueError("no sampleable train interactions")
        self.pairs = pairs
        # sorted encoded (u, i) keys for vectorized membership tests
        self.pos_keys = np.sort(pairs[:, 0] * self.num_items + pairs[:, 1])

    def _is_positive(self, users: np.ndarray, items: np.ndarray) -> np.ndarray:
        q = users * self.num_items + items
        idx = np.searchsorted(self.pos_keys, q)
        idx = np.minimum(idx, len(self.pos_keys) - 1)
        return self.pos_keys[idx] == q

    def sample(self, batch_size: int,
               rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        picks = rng.integers(0, len(self.pairs), size=batch_size)
        u = self.pairs[picks, 0]
        i = self.pairs[picks, 1]
        j = rng.integers(0, self.num_items, size=batch_size)
        bad = self._is_positive(u, j)
        while bad.any():
            j[bad] = rng.integers(0, self.num_items, size=int(bad.sum()))
            bad = self._is_positive(u, j)
        return u, i, j


def sample_batch(g: InteractionGraph, batch_size: int,
                 rng: np.random.Generator):
    """One batch of (user, positive item, negative item) triples."""
    sampler = getattr(g, "_triple_sampler", None)
    if sampler is None:
        sampler = TripleSampler(g)
        g._triple_sampler = sampler
    return sampler.sample(batch_size, rng)


def bpr_loss(scores_pos: np.ndarray, scores_neg: np.ndarray,
             layer0: np.ndarray, reg: float) -> float:
    """-mean ln sigmoid(pos - neg) + reg * ||layer0||_F^2, overflow-safe."""
    scores_pos = np.asarray(scores_pos, dtype=np.float64)
    scores_neg = np.asarray(scores_neg, dtype=np.float64)
    if scores_pos.shape != scores_neg.shape:
        raise ValueError("positive and negative score lists differ in length")
    rank_term = np.logaddexp(0.0, scores_neg - scores_pos).mean()
    return float(rank_term + reg * np.sum(np.asarray(layer0) ** 2))


def backward(batch, state: EmbeddingState, adj: NormalizedAdjacency,
             weights: LayerWeights, reg: float,
             diffusion: DiffusionConfig | None = None,
             diffusion_adj: NormalizedAdjacency | None = None) -> np.ndarray:
    """Gradient of the batch BPR loss with respect to layer0.

    Requires the forward pass (propagate, plus diffusion when given) to
    have run for the current layer0. The output-side gradient is pulled
    back through the diffusion Jacobian transpose (if any) and then
    through the transposed propagation pipeline.
    """
    u, i, j = (np.asarray(x, dtype=np.int64) for x in batch)
    out = state.output
    nu = state.num_users
    zu, zi, zj = out[u], out[nu + i], out[nu + j]
    delta = np.einsum("bd,bd->b", zu, zi - zj)
    coef = (-expit(-delta) / len(u))[:, None]

    gbar = np.zeros_like(out)
    rows = np.concatenate([u, nu + i, nu + j])
    scaled = coef * zu
    vals = np.concatenate([coef * (zi - zj), scaled, -scaled])
    np.add.at(gbar, rows, vals)

    if diffusion is not None:
        gbar = appnp_transpose(gbar, diffusion_adj or adj, diffusion)
        if diffusion.start_from == "last-layer":
            layers = len(state.per_layer) - 1
            for _ in range(layers):
                gbar = spmv_transpose(adj, gbar)
            return gbar + 2.0 * reg * state.layer0

    grad = weights.alphas[0] * gbar
    cur = gbar
    for alpha in weights.alphas[1:]:
        cur = spmv_transpose(adj, cur)
        grad += alpha * cur
    return grad + 2.0 * reg * state.layer0


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, shape) -> "AdamState":
        return cls(m=np.zeros(shape), v=np.zeros(shape))


def adam_step(layer0: np.ndarray, grad: np.ndarray, s: AdamState,
              lr: float) -> np.ndarray:
    """Bias-corrected Adam update, applied to layer0 in place."""
    if layer0.shape != grad.shape:
        raise ValueError("gradient shape does not match parameters")
    if not np.isfinite(grad).all():
        raise NumericError("non-finite gradient; aborting training")
    s.t += 1
    s.m *= s.beta1
    s.m += (1.0 - s.beta1) * grad
    s.v *= s.beta2
    s.v += (1.0 - s.beta2) * np.square(grad)
    m_hat = s.m / (1.0 - s.beta1 ** s.t)
    v_hat = s.v / (1.0 - s.beta2 ** s.t)
    np.sqrt(v_hat, out=v_hat)
    v_hat += s.eps
    m_hat /= v_hat
    m_hat *= lr
    layer0 -= m_hat
    return layer0


def diffusion_operator(graph: InteractionGraph, adj: NormalizedAdjacency,
                       cfg: DiffusionConfig) -> NormalizedAdjacency:
    """Operator the diffusion runs on: symmetric sqrt, optional self loops.

    Reuses the propagation operator object when it already matches.
    """
    if adj.scheme == scheme_by_name(DEFAULT_SCHEME) and adj.self_loops == cfg.self_loops:
        return adj
    return normalize(graph, scheme_by_name(DEFAULT_SCHEME),
                     self_loops=cfg.self_loops)


def train(ds: InteractionDataset, cfg: TrainConfig,
          eval_hook=None) -> tuple[EmbeddingState, list[dict]]:
    """Full training loop; returns the final state and per-epoch history.

    History rows carry the mean batch loss per epoch and, at the
    evaluation cadence (and on the last epoch), Recall/NDCG at
    ``cfg.eval_cutoff``. With diffusion enabled, both the diffused model
    and its undiffused base are tracked (two-curve training record).
    """
    from .metrics import accuracy_at

    graph = build_graph(ds)
    scheme = scheme_by_name(cfg.scheme)
    adj = normalize(graph, scheme)
    weights = LayerWeights.uniform(cfg.layers)
    diff_adj = (diffusion_operator(graph, adj, cfg.diffusion)
                if cfg.diffusion is not None else None)
    diffuse_in_training = (cfg.diffusion is not None
                           and cfg.diffusion.apply_during_training)

    init_seed, sample_seed = np.random.SeedSequence(cfg.seed).spawn(2)
    state = init_embeddings(graph.num_users, graph.num_items, cfg.dim,
                            seed=init_seed)
    rng = np.random.default_rng(sample_seed)
    adam = AdamState.zeros(state.layer0.shape)
    sampler = TripleSampler(graph)
    steps_per_epoch = max(1, math.ceil(len(ds.train) / cfg.batch_size))

    def forward():
        propagate(state, adj, cfg.layers, weights)
        if cfg.diffusion is not None:
            diffuse_state(state, diff_adj, cfg.diffusion)

    history: list[dict] = []
    for epoch in range(1, cfg.epochs + 1):
        epoch_loss = 0.0
        for _ in range(steps_per_epoch):
            batch = sampler.sample(cfg.batch_size, rng)
            if diffuse_in_training:
                forward()
                bwd_diffusion, bwd_adj = cfg.diffusion, diff_adj
            else:
                propagate(state, adj, cfg.layers, weights)
                bwd_diffusion, bwd_adj = None, None
            u, i, j = batch
            out, nu = state.output, state.num_users
            pos = np.einsum("bd,bd->b", out[u], out[nu + i])
            neg = np.einsum("bd,bd->b", out[u], out[nu + j])
            epoch_loss += bpr_loss(pos, neg, state.layer0, cfg.reg)
            grad = backward(batch, state, adj, weights, cfg.reg,
                            diffusion=bwd_diffusion, diffusion_adj=bwd_adj)
            adam_step(state.layer0, grad, adam, cfg.lr)

        row = {"epoch": epoch, "loss": epoch_loss / steps_per_epoch}
        due = (cfg.eval_every > 0 and epoch % cfg.eval_every == 0)
        if due or epoch == cfg.epochs:
            forward()
            if len(ds.test) > 0:
                c = cfg.eval_cutoff
                recall, ndcg = accuracy_at(state, ds, c)
                row[f"recall@{c}"] = recall
                row[f"ndcg@{c}"] = ndcg
                if cfg.diffusion is not None:
                    saved = state.output
                    state.output = state.combined
                    recall_b, ndcg_b = accuracy_at(state, ds, c)
                    state.output = saved
                    row[f"base_recall@{c}"] = recall_b
                    row[f"base_ndcg@{c}"] = ndcg_b
            if eval_hook is not None:
                eval_hook(epoch, state, row)
        history.append(row)

    forward()
    return state, history

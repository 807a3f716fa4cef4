"""Personalized-PageRank diffusion of embeddings by power iteration.

The recurrence Z(k+1) = alpha * Z(0) + (1 - alpha) * A @ Z(k) is linear
in Z(0); after K steps its Jacobian is

    J = alpha * sum_{k<K} (1-alpha)^k A^k + (1-alpha)^K A^K

so the adjoint pass is the same recurrence run with A transposed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import NormalizedAdjacency
from .model import EmbeddingState

START_CHOICES = ("combined", "last-layer")


@dataclass(frozen=True)
class DiffusionConfig:
    """Teleport probability, power-iteration step count and wiring flags."""

    alpha: float = 0.1
    steps: int = 10
    apply_during_training: bool = True
    # which matrix seeds the iteration: the layer-combined embeddings or
    # the bare last propagated layer
    start_from: str = "combined"
    self_loops: bool = False

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.steps < 0:
            raise ValueError(f"steps must be >= 0, got {self.steps}")
        if self.start_from not in START_CHOICES:
            raise ValueError(
                f"start_from must be one of {START_CHOICES}, got {self.start_from!r}")


def _iterate(z0: np.ndarray, adj: NormalizedAdjacency, cfg: DiffusionConfig,
             transpose: bool) -> np.ndarray:
    z0 = np.ascontiguousarray(z0, dtype=np.float64)
    if z0.shape[0] != adj.num_nodes:
        raise ValueError(
            f"input has {z0.shape[0]} rows, operator expects {adj.num_nodes}")
    z = z0.copy()
    if cfg.steps == 0:
        return z
    teleport = cfg.alpha * z0
    buf = np.empty_like(z0)
    for _ in range(cfg.steps):
        adj.apply_affine(z, teleport, 1.0 - cfg.alpha, buf, transpose=transpose)
        z, buf = buf, z
    return z


def appnp(z0: np.ndarray, adj: NormalizedAdjacency,
          cfg: DiffusionConfig) -> np.ndarray:
    """Run the teleport recurrence ``cfg.steps`` times from Z(0) = z0."""
    return _iterate(z0, adj, cfg, transpose=False)


def appnp_transpose(gbar: np.ndarray, adj: NormalizedAdjacency,
                    cfg: DiffusionConfig) -> np.ndarray:
    """Apply the transposed diffusion Jacobian to a gradient matrix."""
    return _iterate(gbar, adj, cfg, transpose=True)


def diffusion_start(state: EmbeddingState, cfg: DiffusionConfig) -> np.ndarray:
    return state.combined if cfg.start_from == "combined" else state.per_layer[-1]


def diffuse_state(state: EmbeddingState, adj: NormalizedAdjacency,
                  cfg: DiffusionConfig) -> EmbeddingState:
    """Replace the scoring output with the diffused embeddings."""
    state.output = appnp(diffusion_start(state, cfg), adj, cfg)
    return state


def grid_search_alpha(candidates, evaluator) -> float:
    """Best teleport probability by validation score, ties toward smaller.

    ``evaluator(alpha)`` returns the validation score (NDCG@20) for one
    candidate. Candidates are evaluated in ascending order.
    """
    candidates = sorted(candidates)
    if not candidates:
        raise ValueError("grid_search_alpha needs at least one candidate")
    best_alpha, best_score = None, -np.inf
    for alpha in candidates:
        s = evaluator(alpha)
        if s > best_score:
            best_alpha, best_score = alpha, s
    return best_alpha

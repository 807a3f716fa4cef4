"""Embedding state, K-layer linear propagation and inner-product scoring."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import NormalizedAdjacency, spmv


@dataclass(frozen=True)
class LayerWeights:
    """Per-layer combination weights alpha_0 .. alpha_K."""

    alphas: tuple[float, ...]

    @classmethod
    def uniform(cls, layers: int) -> "LayerWeights":
        return cls(alphas=(1.0 / (layers + 1),) * (layers + 1))


class EmbeddingState:
    """Layer-0 trainable embeddings plus propagated and combined matrices.

    ``layer0`` holds the only trainable parameters. After ``propagate``,
    ``per_layer[k]`` is the k-times propagated matrix, ``combined`` the
    alpha-weighted layer sum, and ``output`` the matrix scoring reads
    from (equals ``combined`` unless diffusion replaced it).
    """

    def __init__(self, num_users: int, num_items: int, layer0: np.ndarray):
        layer0 = np.asarray(layer0, dtype=np.float64)
        if layer0.shape[0] != num_users + num_items:
            raise ValueError("layer0 must have num_users + num_items rows")
        self.num_users = num_users
        self.num_items = num_items
        self.layer0 = layer0
        self.per_layer: list[np.ndarray] = [layer0]
        self.combined: np.ndarray = layer0
        self.output: np.ndarray = layer0

    @property
    def num_nodes(self) -> int:
        return self.num_users + self.num_items

    @property
    def dim(self) -> int:
        return self.layer0.shape[1]

    def user_output(self) -> np.ndarray:
        return self.output[:self.num_users]

    def item_output(self) -> np.ndarray:
        return self.output[self.num_users:]


def init_embeddings(num_users: int, num_items: int, dim: int,
                    seed: int) -> EmbeddingState:
    """Normal(0, 0.1) initialization, deterministic per seed."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    rng = np.random.default_rng(seed)
    layer0 = rng.normal(0.0, 0.1, size=(num_users + num_items, dim))
    return EmbeddingState(num_users, num_items, layer0)


def propagate(state: EmbeddingState, adj: NormalizedAdjacency, layers: int,
              weights: LayerWeights | None = None) -> EmbeddingState:
    """Run ``layers`` propagation steps and form the weighted layer sum.

    Recomputes per_layer from the current layer0; retains every layer
    for reuse by the backward pass. layers=0 leaves combined == layer0.
    """
    if layers < 0:
        raise ValueError(f"layers must be >= 0, got {layers}")
    if weights is None:
        weights = LayerWeights.uniform(layers)
    if len(weights.alphas) != layers + 1:
        raise ValueError(
            f"need {layers + 1} layer weights, got {len(weights.alphas)}")
    state.per_layer = [state.layer0]
    for _ in range(layers):
        state.per_layer.append(spmv(adj, state.per_layer[-1]))
    combined = weights.alphas[0] * state.per_layer[0]
    for alpha, mat in zip(weights.alphas[1:], state.per_layer[1:]):
        combined += alpha * mat
    state.combined = combined
    state.output = combined
    return state


def _check_ids(state: EmbeddingState, u: int, i: int | None = None) -> None:
    if not 0 <= u < state.num_users:
        raise IndexError(f"user id {u} out of range [0, {state.num_users})")
    if i is not None and not 0 <= i < state.num_items:
        raise IndexError(f"item id {i} out of range [0, {state.num_items})")


def score(state: EmbeddingState, u: int, i: int) -> float:
    """Inner product of the user and item output embeddings."""
    _check_ids(state, u, i)
    return float(state.output[u] @ state.output[state.num_users + i])


def score_all(state: EmbeddingState, u: int) -> np.ndarray:
    """Scores of user ``u`` against every item."""
    _check_ids(state, u)
    return state.item_output() @ state.output[u]


def save_embeddings(matrix: np.ndarray, path: str) -> None:
    """Checkpoint: header "num_nodes dim", one row of reals per node."""
    matrix = np.asarray(matrix, dtype=np.float64)
    with open(path, "w") as fh:
        fh.write(f"{matrix.shape[0]} {matrix.shape[1]}\n")
        for row in matrix:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def load_embeddings(path: str) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: malformed checkpoint header")
        n, d = int(header[0]), int(header[1])
        matrix = np.loadtxt(fh, dtype=np.float64, ndmin=2)
    if matrix.shape != (n, d):
        raise ValueError(
            f"{path}: header says {(n, d)}, data has shape {matrix.shape}")
    return matrix

"""Bipartite interaction graph and degree-normalized propagation operators.

Nodes are indexed users first, then items: node id of item ``i`` is
``num_users + i``. All six normalization schemes weight the edge into a
target node from a source neighbor as

    w(target, source) = deg(target)^-p_t * deg(source)^-p_s

where the side selects which exponents are active (left: target only,
right: source only, symmetric: both) and the norm picks p (1 for L1,
1/2 for square root). The default symmetric square-root scheme gives
w(u, i) = 1 / (sqrt(|N_u|) * sqrt(|N_i|)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse as sp

from .data import InteractionDataset

SIDES = ("left", "right", "symmetric")
NORMS = ("l1", "sqrt")


@dataclass(frozen=True)
class NormScheme:
    side: str
    norm: str

    def __post_init__(self):
        if self.side not in SIDES:
            raise ValueError(f"side must be one of {SIDES}, got {self.side!r}")
        if self.norm not in NORMS:
            raise ValueError(f"norm must be one of {NORMS}, got {self.norm!r}")

    @property
    def exponent(self) -> float:
        return 1.0 if self.norm == "l1" else 0.5


# the six valid scheme names; "sym-sqrt" is the standard LightGCN operator
SCHEMES: dict[str, NormScheme] = {
    "sym-sqrt": NormScheme("symmetric", "sqrt"),
    "left-sqrt": NormScheme("left", "sqrt"),
    "right-sqrt": NormScheme("right", "sqrt"),
    "sym-l1": NormScheme("symmetric", "l1"),
    "left-l1": NormScheme("left", "l1"),
    "right-l1": NormScheme("right", "l1"),
}
DEFAULT_SCHEME = "sym-sqrt"


def scheme_by_name(name: str) -> NormScheme:
    try:
        return SCHEMES[name]
    except KeyError:
        raise ValueError(
            f"unknown scheme {name!r}, expected one of {sorted(SCHEMES)}") from None


class InteractionGraph:
    """Bipartite user-item graph with sorted neighbor lists and degrees."""

    def __init__(self, num_users: int, num_items: int, train_pairs: np.ndarray):
        self.num_users = num_users
        self.num_items = num_items
        self.train_pairs = np.asarray(train_pairs, dtype=np.int64).reshape(-1, 2)
        self.user_neighbors = [np.empty(0, dtype=np.int64) for _ in range(num_users)]
        self.item_neighbors = [np.empty(0, dtype=np.int64) for _ in range(num_items)]
        if self.train_pairs.size:
            order = np.lexsort((self.train_pairs[:, 1], self.train_pairs[:, 0]))
            su = self.train_pairs[order]
            bounds = np.searchsorted(su[:, 0], np.arange(num_users + 1))
            for u in range(num_users):
                self.user_neighbors[u] = su[bounds[u]:bounds[u + 1], 1].copy()
            order = np.lexsort((self.train_pairs[:, 0], self.train_pairs[:, 1]))
            si = self.train_pairs[order]
            bounds = np.searchsorted(si[:, 1], np.arange(num_items + 1))
            for i in range(num_items):
                self.item_neighbors[i] = si[bounds[i]:bounds[i + 1], 0].copy()
        self.user_degrees = np.array([len(n) for n in self.user_neighbors],
                                     dtype=np.int64)
        self.item_degrees = np.array([len(n) for n in self.item_neighbors],
                                     dtype=np.int64)

    @property
    def num_nodes(self) -> int:
        return self.num_users + self.num_items

    def user_item_set(self, u: int) -> set[int]:
        return set(self.user_neighbors[u].tolist())


def build_graph(ds: InteractionDataset) -> InteractionGraph:
    """Neighbor lists from the train split only; test pairs never enter."""
    return InteractionGraph(ds.num_users, ds.num_items, ds.train)


@numba.njit(cache=True)
def _csr_apply(indptr, indices, data, x, out):
    """out[r] = sum_p data[p] * x[indices[p]]; each row summed in CSR order."""
    n, d = out.shape
    for r in range(n):
        for c in range(d):
            out[r, c] = 0.0
        for p in range(indptr[r], indptr[r + 1]):
            col = indices[p]
            w = data[p]
            for c in range(d):
                out[r, c] += w * x[col, c]


@numba.njit(cache=True)
def _csr_apply_affine(indptr, indices, data, x, teleport, scale, out):
    """out[r] = teleport[r] + scale * (A @ x)[r], one fused pass."""
    n, d = out.shape
    for r in range(n):
        for c in range(d):
            out[r, c] = teleport[r, c]
        for p in range(indptr[r], indptr[r + 1]):
            col = indices[p]
            w = scale * data[p]
            for c in range(d):
                out[r, c] += w * x[col, c]


def _apply_csr(matrix: sp.csr_matrix, x: np.ndarray) -> np.ndarray:
    x2 = x if x.ndim == 2 else x[:, None]
    x2 = np.ascontiguousarray(x2, dtype=np.float64)
    out = np.empty_like(x2)
    _csr_apply(matrix.indptr, matrix.indices, matrix.data, x2, out)
    return out if x.ndim == 2 else out[:, 0]


class NormalizedAdjacency:
    """Sparse weighted operator over the (num_users + num_items)-node graph.

    Compressed-row storage covers both node partitions at once, so a
    single matrix product propagates user and item sides simultaneously.
    Immutable after construction; the transposed operator is cached for
    backward passes under asymmetric schemes.
    """

    def __init__(self, matrix: sp.csr_matrix, scheme: NormScheme,
                 num_users: int, num_items: int, self_loops: bool = False):
        self.matrix = matrix
        self.scheme = scheme
        self.num_users = num_users
        self.num_items = num_items
        self.self_loops = self_loops
        self._transpose: sp.csr_matrix | None = None

    @property
    def num_nodes(self) -> int:
        return self.num_users + self.num_items

    @property
    def is_symmetric(self) -> bool:
        return self.scheme.side == "symmetric"

    def transpose_matrix(self) -> sp.csr_matrix:
        if self.is_symmetric:
            return self.matrix
        if self._transpose is None:
            self._transpose = self.matrix.transpose().tocsr()
            self._transpose.sort_indices()
        return self._transpose

    def apply(self, x: np.ndarray) -> np.ndarray:
        return _apply_csr(self.matrix, x)

    def apply_transpose(self, x: np.ndarray) -> np.ndarray:
        return _apply_csr(self.transpose_matrix(), x)

    def apply_affine(self, x: np.ndarray, teleport: np.ndarray, scale: float,
                     out: np.ndarray, transpose: bool = False) -> None:
        """out = teleport + scale * (A @ x) without intermediate buffers."""
        m = self.transpose_matrix() if transpose else self.matrix
        _csr_apply_affine(m.indptr, m.indices, m.data, x, teleport, scale, out)

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()


def normalize(g: InteractionGraph, scheme: NormScheme,
              self_loops: bool = False) -> NormalizedAdjacency:
    """Build the weighted propagation operator for one scheme.

    With ``self_loops`` every node gains an edge to itself and degrees
    are incremented accordingly (used for diffusion sensitivity runs).
    """
    nu, ni = g.num_users, g.num_items
    pairs = g.train_pairs
    deg = np.concatenate([g.user_degrees, g.item_degrees]).astype(np.float64)
    if self_loops:
        deg = deg + 1.0

    rows = np.concatenate([pairs[:, 0], pairs[:, 1] + nu])
    cols = np.concatenate([pairs[:, 1] + nu, pairs[:, 0]])
    if self_loops:
        loops = np.arange(nu + ni, dtype=np.int64)
        rows = np.concatenate([rows, loops])
        cols = np.concatenate([cols, loops])
    if rows.size:
        assert deg[rows].min() >= 1 and deg[cols].min() >= 1

    p = scheme.exponent
    weights = np.ones(len(rows), dtype=np.float64)
    if scheme.side in ("left", "symmetric"):
        weights *= deg[rows] ** -p
    if scheme.side in ("right", "symmetric"):
        weights *= deg[cols] ** -p

    matrix = sp.csr_matrix(
        sp.coo_matrix((weights, (rows, cols)), shape=(nu + ni, nu + ni)))
    matrix.sort_indices()
    return NormalizedAdjacency(matrix, scheme, nu, ni, self_loops=self_loops)


def spmv(adj: NormalizedAdjacency, x: np.ndarray) -> np.ndarray:
    """y[v] = sum over neighbors w of weight(v, w) * x[w], row order kept."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != adj.num_nodes:
        raise ValueError(
            f"input has {x.shape[0]} rows, operator expects {adj.num_nodes}")
    return adj.apply(x)


def spmv_transpose(adj: NormalizedAdjacency, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != adj.num_nodes:
        raise ValueError(
            f"input has {x.shape[0]} rows, operator expects {adj.num_nodes}")
    return adj.apply_transpose(x)


def dump_operator(adj: NormalizedAdjacency, path: str) -> None:
    """Write the operator as "row col weight" text triples (row-major)."""
    coo = adj.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        for r, c, w in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{r} {c} {w:.17g}\n")

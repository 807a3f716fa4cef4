"""Top-K retrieval metrics: accuracy, intra-list diversity, fairness bins."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .data import InteractionDataset
from .graph import InteractionGraph, build_graph
from .model import EmbeddingState

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FairnessBin:
    boundary: int        # highest train-interaction count in the bin
    count: int           # users in the bin
    value: float         # mean of the binned metric


@dataclass(frozen=True)
class FairnessTable:
    bins: tuple[FairnessBin, ...]
    gap: float           # max - min across bin means
    std: float           # population std across bin means


@dataclass(frozen=True)
class MetricsReport:
    cutoff: int
    num_users: int       # evaluable users (>= 1 test item)
    recall: float
    precision: float
    ndcg: float
    ild: float
    fairness: FairnessTable


def _ranked_row(scores: np.ndarray, exclude: np.ndarray, k: int) -> np.ndarray:
    """Top-k item ids by descending score, ties by ascending id."""
    scores = scores.astype(np.float64, copy=True)
    if exclude.size:
        scores[exclude] = -np.inf
    order = np.argsort(-scores, kind="stable")
    n_candidates = scores.size - exclude.size
    if n_candidates < k:
        logger.warning("only %d candidate item(s) for a top-%d list",
                       n_candidates, k)
    return order[:min(k, n_candidates)]


def top_k(state: EmbeddingState, g: InteractionGraph, u: int,
          k: int) -> np.ndarray:
    """Highest-scoring items for ``u`` with the train items excluded."""
    if not 0 <= u < state.num_users:
        raise IndexError(f"user id {u} out of range [0, {state.num_users})")
    scores = state.item_output() @ state.output[u]
    return _ranked_row(scores, g.user_neighbors[u], k)


def recall_precision_at_k(ranked: np.ndarray, test_items: set,
                          k: int) -> tuple[float, float]:
    hits = sum(1 for item in ranked[:k] if int(item) in test_items)
    return hits / len(test_items), hits / k


def ndcg_at_k(ranked: np.ndarray, test_items: set, k: int) -> float:
    """Binary-relevance DCG with log2 discount over 1-based ranks."""
    dcg = sum(1.0 / np.log2(r + 2)
              for r, item in enumerate(ranked[:k]) if int(item) in test_items)
    ideal = min(len(test_items), k)
    idcg = float(np.sum(1.0 / np.log2(np.arange(2, ideal + 2))))
    return dcg / idcg


def ild(ranked: np.ndarray, item_embeddings: np.ndarray) -> float | None:
    """Mean pairwise cosine distance over the list's item embeddings.

    Returns None for lists shorter than 2; zero-norm embeddings are
    skipped pairwise with a warning.
    """
    if len(ranked) < 2:
        return None
    emb = np.asarray(item_embeddings, dtype=np.float64)[np.asarray(ranked)]
    norms = np.linalg.norm(emb, axis=1)
    ok = norms > 0
    if not ok.all():
        logger.warning("skipped %d zero-norm item embedding(s) in ILD",
                       int((~ok).sum()))
        emb, norms = emb[ok], norms[ok]
        if len(emb) < 2:
            return None
    unit = emb / norms[:, None]
    cos = unit @ unit.T
    n = len(unit)
    total = (1.0 - cos)[np.triu_indices(n, k=1)].sum()
    return float(2.0 * total / (n * (n - 1)))


def fairness_bins(per_user_metric: dict[int, float], train_counts: np.ndarray,
                  num_bins: int) -> FairnessTable:
    """Quantile bins over train-interaction counts with per-bin means.

    Users are sorted by count and split into ``num_bins`` groups of
    equal size (+-1); a boundary that would split a run of equal counts
    is moved to the nearest edge of that run when both sides stay
    nonempty.
    """
    if num_bins < 2:
        raise ValueError(f"num_bins must be >= 2, got {num_bins}")
    users = sorted(per_user_metric, key=lambda u: (train_counts[u], u))
    if len(users) < num_bins:
        raise ValueError(
            f"cannot split {len(users)} user(s) into {num_bins} bins")
    counts = np.array([train_counts[u] for u in users])
    n = len(users)
    edges = [round(b * n / num_bins) for b in range(num_bins + 1)]
    for bi in range(1, num_bins):
        b = edges[bi]
        if counts[b - 1] != counts[b]:
            continue
        lo = b
        while lo > 0 and counts[lo - 1] == counts[b]:
            lo -= 1
        hi = b
        while hi < n and counts[hi] == counts[b]:
            hi += 1
        for cand in sorted((lo, hi), key=lambda c: abs(c - b)):
            if edges[bi - 1] < cand < edges[bi + 1]:
                edges[bi] = cand
                break

    bins = []
    for bi in range(num_bins):
        members = users[edges[bi]:edges[bi + 1]]
        values = [per_user_metric[u] for u in members]
        bins.append(FairnessBin(
            boundary=int(train_counts[members[-1]]),
            count=len(members),
            value=float(np.mean(values))))
    means = np.array([b.value for b in bins])
    return FairnessTable(bins=tuple(bins),
                         gap=float(means.max() - means.min()),
                         std=float(means.std()))


def _evaluable_users(ds: InteractionDataset) -> tuple[list[int], dict[int, set]]:
    test_sets: dict[int, set] = {}
    for u, i in ds.test:
        test_sets.setdefault(int(u), set()).add(int(i))
    return sorted(test_sets), test_sets


def _ranked_matrix(state: EmbeddingState, g: InteractionGraph,
                   users: list[int], k: int) -> list[np.ndarray]:
    scores = state.output[users] @ state.item_output().T
    lists = []
    for row, u in enumerate(users):
        lists.append(_ranked_row(scores[row], g.user_neighbors[u], k))
    return lists


def accuracy_at(state: EmbeddingState, ds: InteractionDataset,
                cutoff: int) -> tuple[float, float]:
    """Mean Recall and NDCG at one cutoff (training-cadence metrics)."""
    users, test_sets = _evaluable_users(ds)
    if not users:
        raise ValueError("no users with test interactions")
    g = build_graph(ds)
    lists = _ranked_matrix(state, g, users, cutoff)
    recalls = [recall_precision_at_k(lst, test_sets[u], cutoff)[0]
               for u, lst in zip(users, lists)]
    ndcgs = [ndcg_at_k(lst, test_sets[u], cutoff)
             for u, lst in zip(users, lists)]
    return float(np.mean(recalls)), float(np.mean(ndcgs))


def evaluate(state: EmbeddingState, ds: InteractionDataset,
             cutoffs=(20,), num_bins: int = 4) -> dict[int, MetricsReport]:
    """Aggregate all metrics per cutoff over users with test items."""
    users, test_sets = _evaluable_users(ds)
    if not users:
        raise ValueError("no users with test interactions")
    g = build_graph(ds)
    max_k = max(cutoffs)
    lists = _ranked_matrix(state, g, users, max_k)
    item_emb = state.item_output()

    reports = {}
    for k in cutoffs:
        recalls, precisions, ndcgs, ilds = [], [], [], []
        per_user_ndcg = {}
        for u, lst in zip(users, lists):
            lst_k = lst[:k]
            r, p = recall_precision_at_k(lst_k, test_sets[u], k)
            nd = ndcg_at_k(lst_k, test_sets[u], k)
            recalls.append(r)
            precisions.append(p)
            ndcgs.append(nd)
            per_user_ndcg[u] = nd
            div = ild(lst_k, item_emb)
            if div is not None:
                ilds.append(div)
        effective_bins = min(num_bins, len(users))
        if effective_bins >= 2:
            fairness = fairness_bins(per_user_ndcg, g.user_degrees, effective_bins)
        else:  # too few users to bin: one trivial bin
            values = np.array([per_user_ndcg[u] for u in users])
            only = FairnessBin(
                boundary=int(max(g.user_degrees[u] for u in users)),
                count=len(users), value=float(values.mean()))
            fairness = FairnessTable(bins=(only,), gap=0.0, std=0.0)
        reports[k] = MetricsReport(
            cutoff=k, num_users=len(users),
            recall=float(np.mean(recalls)),
            precision=float(np.mean(precisions)),
            ndcg=float(np.mean(ndcgs)),
            ild=float(np.mean(ilds)) if ilds else float("nan"),
            fairness=fairness)
    return reports

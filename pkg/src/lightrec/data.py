"""Interaction data: loading, splitting, saving and basic statistics."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

FORMATS = ("adjacency-list", "pair-list")

TRAIN_FILE = "train.txt"
TEST_FILE = "test.txt"
USER_MAP_FILE = "user_map.txt"
ITEM_MAP_FILE = "item_map.txt"


class DatasetError(Exception):
    """Raised for unreadable, malformed or empty interaction data."""


@dataclass(frozen=True)
class InteractionDataset:
    """Immutable user-item interaction data with dense 0-based ids.

    ``train`` and ``test`` are int64 arrays of shape (n, 2), one
    (user, item) pair per row, deduplicated and disjoint.
    """

    num_users: int
    num_items: int
    train: np.ndarray
    test: np.ndarray
    user_labels: tuple[str, ...] = ()
    item_labels: tuple[str, ...] = ()
    duplicates_dropped: int = 0

    def __post_init__(self):
        for name in ("train", "test"):
            arr = getattr(self, name)
            arr = np.asarray(arr, dtype=np.int64).reshape(-1, 2)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        for arr, hi, what in ((self.train, self.num_users, "user"),
                              (self.test, self.num_users, "user")):
            if arr.size and (arr[:, 0].min() < 0 or arr[:, 0].max() >= hi):
                raise DatasetError(f"{what} id out of range [0, {hi})")
        for arr in (self.train, self.test):
            if arr.size and (arr[:, 1].min() < 0 or arr[:, 1].max() >= self.num_items):
                raise DatasetError(f"item id out of range [0, {self.num_items})")

    @property
    def num_interactions(self) -> int:
        return len(self.train) + len(self.test)


@dataclass(frozen=True)
class DatasetStats:
    num_users: int
    num_items: int
    num_interactions: int
    density: float


def _parse_lines(path: str, fmt: str) -> list[tuple[str, str]]:
    """Read one interaction file into raw (user, item) string-id pairs."""
    pairs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            if fmt == "pair-list":
                if len(tokens) != 2:
                    raise DatasetError(
                        f"{path}:{lineno}: expected 'user_id item_id', got {len(tokens)} tokens")
                pairs.append((tokens[0], tokens[1]))
            else:  # adjacency-list: "user item item ..." (zero items tolerated)
                user = tokens[0]
                for item in tokens[1:]:
                    pairs.append((user, item))
    return pairs


def _id_order(ids: set[str]) -> list[str]:
    """Dense-remap order: numeric when every id is an integer literal."""
    try:
        return sorted(ids, key=int)
    except ValueError:
        return sorted(ids)


def _dedup(pairs: np.ndarray) -> tuple[np.ndarray, int]:
    if pairs.size == 0:
        return pairs.reshape(-1, 2), 0
    uniq = np.unique(pairs, axis=0)
    return uniq, len(pairs) - len(uniq)


def load_interactions(path: str, fmt: str = "adjacency-list") -> InteractionDataset:
    """Load a dataset from a single train file or a directory.

    A directory must contain ``train.txt`` and may contain ``test.txt``;
    a plain file is loaded as the train split with an empty test split.
    External ids of any string form are remapped to dense 0-based
    integers (numeric order when all ids are integer literals).
    Duplicate pairs are dropped and counted.
    """
    if fmt not in FORMATS:
        raise DatasetError(f"unknown format {fmt!r}, expected one of {FORMATS}")
    if os.path.isdir(path):
        train_path = os.path.join(path, TRAIN_FILE)
        if not os.path.isfile(train_path):
            raise DatasetError(f"dataset directory {path} has no {TRAIN_FILE}")
        test_path = os.path.join(path, TEST_FILE)
    elif os.path.isfile(path):
        train_path, test_path = path, None
    else:
        raise DatasetError(f"no such file or directory: {path}")

    raw_train = _parse_lines(train_path, fmt)
    raw_test = (_parse_lines(test_path, fmt)
                if test_path and os.path.isfile(test_path) else [])
    if not raw_train and not raw_test:
        raise DatasetError(f"{path}: dataset is empty")

    users = {u for u, _ in raw_train} | {u for u, _ in raw_test}
    items = {i for _, i in raw_train} | {i for _, i in raw_test}
    user_labels = _id_order(users)
    item_labels = _id_order(items)
    umap = {u: k for k, u in enumerate(user_labels)}
    imap = {i: k for k, i in enumerate(item_labels)}

    def remap(raw):
        if not raw:
            return np.empty((0, 2), dtype=np.int64)
        return np.array([(umap[u], imap[i]) for u, i in raw], dtype=np.int64)

    train, dup_train = _dedup(remap(raw_train))
    test, dup_test = _dedup(remap(raw_test))
    dropped = dup_train + dup_test
    if test.size:
        # test pairs also present in train are dropped from test
        train_keys = set(map(tuple, train))
        keep = np.array([tuple(p) not in train_keys for p in test], dtype=bool)
        dropped += int((~keep).sum())
        test = test[keep]
    if dropped:
        logger.warning("dropped %d duplicate interaction(s) from %s", dropped, path)

    return InteractionDataset(
        num_users=len(user_labels), num_items=len(item_labels),
        train=train, test=test,
        user_labels=tuple(user_labels), item_labels=tuple(item_labels),
        duplicates_dropped=dropped)


def save_interactions(ds: InteractionDataset, out_dir: str,
                      fmt: str = "adjacency-list") -> None:
    """Write train/test files plus the id-mapping files to ``out_dir``."""
    if fmt not in FORMATS:
        raise DatasetError(f"unknown format {fmt!r}, expected one of {FORMATS}")
    os.makedirs(out_dir, exist_ok=True)
    for fname, pairs in ((TRAIN_FILE, ds.train), (TEST_FILE, ds.test)):
        with open(os.path.join(out_dir, fname), "w") as fh:
            if fmt == "pair-list":
                for u, i in pairs:
                    fh.write(f"{u} {i}\n")
            else:
                by_user: dict[int, list[int]] = {}
                for u, i in pairs:
                    by_user.setdefault(int(u), []).append(int(i))
                for u in sorted(by_user):
                    row = " ".join(str(i) for i in sorted(by_user[u]))
                    fh.write(f"{u} {row}\n")
    for fname, labels in ((USER_MAP_FILE, ds.user_labels),
                          (ITEM_MAP_FILE, ds.item_labels)):
        with open(os.path.join(out_dir, fname), "w") as fh:
            for internal, external in enumerate(labels):
                fh.write(f"{internal} {external}\n")


def holdout_split(pairs, test_fraction: float, seed: int) -> InteractionDataset:
    """Per-user holdout: floor(test_fraction * degree) pairs go to test.

    Users with a single interaction keep it in train. Deterministic for
    a fixed seed. Id ranges are inferred from the pairs (max id + 1).
    """
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    pairs, _ = _dedup(pairs)
    if pairs.size == 0:
        raise DatasetError("holdout_split: no interactions")
    num_users = int(pairs[:, 0].max()) + 1
    num_items = int(pairs[:, 1].max()) + 1

    rng = np.random.default_rng(seed)
    train_rows, test_rows = [], []
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    pairs = pairs[order]
    boundaries = np.searchsorted(pairs[:, 0], np.arange(num_users + 1))
    for u in range(num_users):
        items = pairs[boundaries[u]:boundaries[u + 1], 1]
        deg = len(items)
        if deg == 0:
            continue
        n_test = int(test_fraction * deg) if deg > 1 else 0
        perm = rng.permutation(deg)
        for j in perm[:n_test]:
            test_rows.append((u, items[j]))
        for j in perm[n_test:]:
            train_rows.append((u, items[j]))
    return InteractionDataset(num_users=num_users, num_items=num_items,
                              train=np.array(train_rows, dtype=np.int64),
                              test=np.array(test_rows, dtype=np.int64))


def compute_stats(ds: InteractionDataset) -> DatasetStats:
    """Counts over train plus test, and the interaction density."""
    n = ds.num_interactions
    return DatasetStats(
        num_users=ds.num_users, num_items=ds.num_items, num_interactions=n,
        density=n / (ds.num_users * ds.num_items))


def stats_kv_lines(stats: DatasetStats) -> list[str]:
    return [
        f"num_users={stats.num_users}",
        f"num_items={stats.num_items}",
        f"num_interactions={stats.num_interactions}",
        f"density={stats.density:.10g}",
    ]


def stats_csv(stats: DatasetStats) -> str:
    """Header line plus one CSV row."""
    header = "num_users,num_items,num_interactions,density"
    row = (f"{stats.num_users},{stats.num_items},"
           f"{stats.num_interactions},{stats.density:.10g}")
    return header + "\n" + row + "\n"

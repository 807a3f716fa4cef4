#!/usr/bin/env python3
"""Generate the checked-in synthetic dataset at Amazon-Electronics scale.

1434 users x 1522 items x 35931 interactions (density ~0.01645), with
planted community structure: items fall into blocks, every user belongs
to one block, and most of a user's interactions stay inside it (with a
popularity skew) while a slice is uniform noise. Degrees are heavily
skewed, so most users are sparse; ranking their held-out in-community
items rewards propagating evidence over the graph.

Deterministic: rerunning reproduces the committed files byte for byte.
"""

import os
import sys

import numpy as np

NUM_USERS = 1434
NUM_ITEMS = 1522
NUM_INTERACTIONS = 35931
NUM_COMMUNITIES = 8
NOISE_FRACTION = 0.25
POPULARITY_EXPONENT = 0.3
MIN_DEGREE = 4
MAX_DEGREE = 200
DEGREE_LOG_MEAN = 2.6    # median ~13.5; heavy tail carries the mean to ~25
DEGREE_LOG_SIGMA = 1.0
TEST_FRACTION = 0.2
OBSCURE_FRACTION = 0.2
SEED = 20240901


def sample_degrees(rng):
    """Skewed lognormal degrees clipped to bounds, exact fixed total."""
    raw = rng.lognormal(mean=DEGREE_LOG_MEAN, sigma=DEGREE_LOG_SIGMA,
                        size=NUM_USERS)
    deg = np.clip(np.round(raw), MIN_DEGREE, MAX_DEGREE).astype(int)
    while deg.sum() != NUM_INTERACTIONS:
        u = int(rng.integers(NUM_USERS))
        if deg.sum() > NUM_INTERACTIONS and deg[u] > MIN_DEGREE:
            deg[u] -= 1
        elif deg.sum() < NUM_INTERACTIONS and deg[u] < MAX_DEGREE:
            deg[u] += 1
    return deg


def build_interactions(rng):
    user_comm = rng.integers(0, NUM_COMMUNITIES, size=NUM_USERS)
    item_comm = np.sort(rng.integers(0, NUM_COMMUNITIES, size=NUM_ITEMS))
    groups, weights, obscure = [], [], []
    for c in range(NUM_COMMUNITIES):
        block = np.flatnonzero(item_comm == c)
        n_main = max(1, int(round(len(block) * (1.0 - OBSCURE_FRACTION))))
        groups.append(block[:n_main])
        obscure.append(block[n_main:])
        w = (np.arange(n_main) + 1.0) ** -POPULARITY_EXPONENT
        weights.append(w / w.sum())
    junk_pool = (np.concatenate([o for o in obscure if o.size])
                 if any(o.size for o in obscure) else np.arange(NUM_ITEMS))

    degrees = sample_degrees(rng)
    chosen = [set() for _ in range(NUM_USERS)]
    local = [set() for _ in range(NUM_USERS)]
    for u in range(NUM_USERS):
        c = int(user_comm[u])
        group, w = groups[c], weights[c]
        n_noise = int(rng.binomial(degrees[u], NOISE_FRACTION))
        n_local = min(degrees[u] - n_noise, len(group))
        picked = rng.choice(group, size=n_local, replace=False, p=w)
        chosen[u].update(int(i) for i in picked)
        local[u] = set(chosen[u])
        while len(chosen[u]) < degrees[u]:  # noise drawn from the obscure pools
            i = int(junk_pool[rng.integers(len(junk_pool))])
            if i not in chosen[u]:
                chosen[u].add(i)

    # every item needs at least one interaction: steal from heavy users
    item_count = np.zeros(NUM_ITEMS, dtype=int)
    for u in range(NUM_USERS):
        for i in chosen[u]:
            item_count[i] += 1
    comm_users = [np.flatnonzero(user_comm == c) for c in range(NUM_COMMUNITIES)]
    for i in np.flatnonzero(item_count == 0):
        cands = comm_users[item_comm[i]]
        if cands.size == 0:
            cands = np.arange(NUM_USERS)
        for u in rng.permutation(cands):
            drop = [x for x in sorted(chosen[u]) if item_count[x] > 1]
            if int(i) not in chosen[u] and drop:
                out = drop[int(rng.integers(len(drop)))]
                chosen[u].remove(out)
                local[u].discard(out)
                item_count[out] -= 1
                chosen[u].add(int(i))
                item_count[i] += 1
                break
    assert item_count.min() >= 1
    assert sum(len(s) for s in chosen) == NUM_INTERACTIONS
    return chosen, local, item_count


def split(rng, chosen, local, item_count):
    """Per-user holdout preferring the user's in-community picks.

    Noise picks stay in train (they carry no recoverable signal), and
    every item keeps at least one train interaction.
    """
    train_count = item_count.copy()
    train_rows, test_rows = [], []
    for u in range(len(chosen)):
        items = sorted(chosen[u])
        n_test = int(TEST_FRACTION * len(items))
        in_local = [i for i in items if i in local[u]]
        rest = [i for i in items if i not in local[u]]
        order = list(rng.permutation(in_local)) + list(rng.permutation(rest))
        test_u = []
        for i in order:
            if len(test_u) == n_test:
                break
            if train_count[i] > 1:
                train_count[i] -= 1
                test_u.append(int(i))
        test_set = set(test_u)
        train_rows.append((u, [i for i in items if i not in test_set]))
        test_rows.append((u, sorted(test_u)))
    return train_rows, test_rows


def write_adjacency(rows, path):
    with open(path, "w") as fh:
        for u, items in rows:
            if items:
                fh.write(f"{u} " + " ".join(str(i) for i in items) + "\n")
            else:
                fh.write(f"{u}\n")


def generate(out_dir, seed=SEED):
    rng = np.random.default_rng(seed)
    chosen, local, item_count = build_interactions(rng)
    train_rows, test_rows = split(rng, chosen, local, item_count)
    n_train = sum(len(r[1]) for r in train_rows)
    n_test = sum(len(r[1]) for r in test_rows)
    assert n_train + n_test == NUM_INTERACTIONS
    os.makedirs(out_dir, exist_ok=True)
    write_adjacency(train_rows, os.path.join(out_dir, "train.txt"))
    write_adjacency(test_rows, os.path.join(out_dir, "test.txt"))
    return n_train, n_test


def main(out_dir):
    n_train, n_test = generate(out_dir)
    print(f"wrote {n_train} train / {n_test} test interactions to {out_dir}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else
         os.path.join(os.path.dirname(__file__), "..", "data",
                      "a-electro-synthetic"))

import numpy as np
import pytest

from lightrec.data import InteractionDataset

# three-edge toy graph used across modules: u0-{i0,i1}, u1-{i0}
TOY_PAIRS = [(0, 0), (0, 1), (1, 0)]


@pytest.fixture
def toy_dataset():
    return InteractionDataset(num_users=2, num_items=2,
                              train=np.array(TOY_PAIRS),
                              test=np.empty((0, 2), dtype=np.int64))


def make_dataset(pairs, num_users, num_items, test_pairs=()):
    return InteractionDataset(
        num_users=num_users, num_items=num_items,
        train=np.array(pairs, dtype=np.int64).reshape(-1, 2),
        test=np.array(list(test_pairs), dtype=np.int64).reshape(-1, 2))

import numpy as np
import pytest

import oracles
from conftest import TOY_PAIRS, make_dataset
from lightrec.graph import build_graph, normalize, scheme_by_name
from lightrec.model import (EmbeddingState, LayerWeights, init_embeddings,
                            load_embeddings, propagate, save_embeddings,
                            score, score_all)


def toy_adj():
    return normalize(build_graph(make_dataset(TOY_PAIRS, 2, 2)),
                     scheme_by_name("sym-sqrt"))


class TestInit:
    def test_deterministic_per_seed(self):
        a = init_embeddings(10, 15, 8, seed=3)
        b = init_embeddings(10, 15, 8, seed=3)
        assert np.array_equal(a.layer0, b.layer0)

    def test_different_seeds_differ(self):
        a = init_embeddings(10, 15, 8, seed=3)
        b = init_embeddings(10, 15, 8, seed=4)
        assert not np.array_equal(a.layer0, b.layer0)

    def test_sample_std_near_point_one(self):
        state = init_embeddings(25, 25, 8, seed=0)
        assert 0.07 <= state.layer0.std() <= 0.13

    def test_bad_dim(self):
        with pytest.raises(ValueError):
            init_embeddings(2, 2, 0, seed=0)


class TestPropagate:
    def test_zero_layers_is_identity(self):
        state = init_embeddings(2, 2, 4, seed=1)
        propagate(state, toy_adj(), 0)
        assert np.array_equal(state.combined, state.layer0)
        assert state.per_layer[0] is state.layer0

    def test_uniform_weights_sum(self):
        state = init_embeddings(2, 2, 4, seed=1)
        propagate(state, toy_adj(), 2)
        want = (state.per_layer[0] + state.per_layer[1] + state.per_layer[2]) / 3
        assert np.allclose(state.combined, want, atol=1e-15)

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(7)
        pairs = oracles.random_instance(rng, 9, 12)
        adj = normalize(build_graph(make_dataset(pairs, 9, 12)),
                        scheme_by_name("sym-sqrt"))
        dense = oracles.dense_operator(pairs, 9, 12)
        layer0 = rng.normal(size=(21, 5))
        state = EmbeddingState(9, 12, layer0)
        for layers in (1, 3):
            propagate(state, adj, layers)
            want = oracles.dense_propagate(layer0, dense, layers)
            assert np.max(np.abs(state.combined - want)) <= 1e-12

    def test_custom_weights(self):
        state = init_embeddings(2, 2, 3, seed=2)
        w = LayerWeights(alphas=(0.5, 0.25, 0.25))
        propagate(state, toy_adj(), 2, w)
        want = (0.5 * state.per_layer[0] + 0.25 * state.per_layer[1]
                + 0.25 * state.per_layer[2])
        assert np.allclose(state.combined, want, atol=1e-15)

    def test_idempotent(self):
        state = init_embeddings(2, 2, 4, seed=1)
        propagate(state, toy_adj(), 2)
        first = state.combined.copy()
        propagate(state, toy_adj(), 2)
        assert np.array_equal(state.combined, first)

    def test_weight_count_checked(self):
        state = init_embeddings(2, 2, 4, seed=1)
        with pytest.raises(ValueError):
            propagate(state, toy_adj(), 2, LayerWeights(alphas=(1.0,)))


class TestScore:
    def make_state(self, user_rows, item_rows):
        nu, ni = len(user_rows), len(item_rows)
        state = EmbeddingState(nu, ni, np.vstack([user_rows, item_rows]))
        return state

    def test_unit_vectors(self):
        state = self.make_state([[1.0, 0.0]], [[1.0, 0.0]])
        assert score(state, 0, 0) == pytest.approx(1.0)

    def test_orthogonal(self):
        state = self.make_state([[1.0, 0.0]], [[0.0, 1.0]])
        assert score(state, 0, 0) == pytest.approx(0.0)

    def test_arithmetic(self):
        state = self.make_state([[1.0, 2.0]], [[3.0, -1.0]])
        assert score(state, 0, 0) == pytest.approx(1.0)

    def test_out_of_range(self):
        state = self.make_state([[1.0]], [[1.0]])
        with pytest.raises(IndexError):
            score(state, 1, 0)
        with pytest.raises(IndexError):
            score(state, 0, 5)

    def test_score_all_matches_per_pair_loop(self):
        rng = np.random.default_rng(13)
        state = EmbeddingState(6, 9, rng.normal(size=(15, 4)))
        for u in range(6):
            vec = score_all(state, u)
            want = np.array([score(state, u, i) for i in range(9)])
            assert np.max(np.abs(vec - want)) <= 1e-12

    def test_score_all_single_item(self):
        state = self.make_state([[2.0, 1.0]], [[1.0, 1.0]])
        assert score_all(state, 0).tolist() == [score(state, 0, 0)]

    def test_zero_user_embedding(self):
        state = self.make_state([[0.0, 0.0]], [[1.0, 2.0]])
        assert np.all(score_all(state, 0) == 0.0)

    def test_bilinear_scaling(self):
        rng = np.random.default_rng(19)
        pairs = oracles.random_instance(rng, 5, 7)
        adj = normalize(build_graph(make_dataset(pairs, 5, 7)),
                        scheme_by_name("sym-sqrt"))
        layer0 = rng.normal(size=(12, 4))
        c = 1.9
        s1 = EmbeddingState(5, 7, layer0)
        s2 = EmbeddingState(5, 7, c * layer0)
        propagate(s1, adj, 3)
        propagate(s2, adj, 3)
        for u in range(5):
            a = score_all(s1, u)
            b = score_all(s2, u)
            assert np.max(np.abs(b - c * c * a)) <= 1e-10 * max(np.max(np.abs(b)), 1.0)


def test_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(23)
    mat = rng.normal(scale=0.1, size=(14, 6))
    path = tmp_path / "emb.txt"
    save_embeddings(mat, str(path))
    header = path.read_text().splitlines()[0]
    assert header == "14 6"
    again = load_embeddings(str(path))
    assert np.max(np.abs(again - mat)) <= 1e-12


def test_checkpoint_header_mismatch(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("2 2\n1 0\n")
    with pytest.raises(ValueError):
        load_embeddings(str(path))

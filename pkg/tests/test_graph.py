import numpy as np
import pytest

import oracles
from conftest import TOY_PAIRS, make_dataset
from lightrec.graph import (SCHEMES, NormScheme, build_graph, dump_operator,
                            normalize, scheme_by_name, spmv, spmv_transpose)


def toy_graph():
    return build_graph(make_dataset(TOY_PAIRS, 2, 2))


def random_graph(rng, num_users=8, num_items=11):
    pairs = oracles.random_instance(rng, num_users, num_items, min_deg=1)
    return build_graph(make_dataset(pairs, num_users, num_items)), pairs


class TestBuildGraph:
    def test_degrees(self):
        g = toy_graph()
        assert g.user_degrees.tolist() == [2, 1]
        assert g.item_degrees.tolist() == [2, 1]
        assert g.user_neighbors[0].tolist() == [0, 1]
        assert g.item_neighbors[0].tolist() == [0, 1]

    def test_test_pairs_never_enter(self):
        a = build_graph(make_dataset(TOY_PAIRS, 2, 2))
        b = build_graph(make_dataset(TOY_PAIRS, 2, 2, test_pairs=[(1, 1)]))
        assert a.user_degrees.tolist() == b.user_degrees.tolist()
        assert a.item_degrees.tolist() == b.item_degrees.tolist()

    def test_single_pair(self):
        g = build_graph(make_dataset([(0, 0)], 1, 1))
        assert g.user_degrees.tolist() == [1]
        assert g.item_degrees.tolist() == [1]

    def test_symmetry_property(self):
        rng = np.random.default_rng(11)
        g, _ = random_graph(rng)
        for u in range(g.num_users):
            for i in g.user_neighbors[u]:
                assert u in g.item_neighbors[i]
        for i in range(g.num_items):
            for u in g.item_neighbors[i]:
                assert i in g.user_neighbors[u]


class TestNormalize:
    def test_symmetric_sqrt_weights(self):
        adj = normalize(toy_graph(), scheme_by_name("sym-sqrt"))
        m = adj.to_dense()
        nu = 2
        assert m[0, nu + 0] == pytest.approx(0.5)            # 1/(sqrt2*sqrt2)
        assert m[0, nu + 1] == pytest.approx(1 / np.sqrt(2))  # 0.70711
        assert m[1, nu + 0] == pytest.approx(1 / np.sqrt(2))

    def test_single_edge_weight_one_any_scheme(self):
        g = build_graph(make_dataset([(0, 0)], 1, 1))
        for scheme in SCHEMES.values():
            m = normalize(g, scheme).to_dense()
            assert m[0, 1] == pytest.approx(1.0)
            assert m[1, 0] == pytest.approx(1.0)

    def test_left_l1_user_rows(self):
        m = normalize(toy_graph(), scheme_by_name("left-l1")).to_dense()
        nu = 2
        assert m[0, nu + 0] == pytest.approx(0.5)
        assert m[0, nu + 1] == pytest.approx(0.5)
        assert m[1, nu + 0] == pytest.approx(1.0)

    def test_left_l1_rows_sum_to_one(self):
        rng = np.random.default_rng(5)
        g, _ = random_graph(rng)
        m = normalize(g, scheme_by_name("left-l1")).to_dense()
        sums = m.sum(axis=1)
        deg = np.concatenate([g.user_degrees, g.item_degrees])
        assert np.allclose(sums[deg >= 1], 1.0, atol=1e-12)

    @pytest.mark.parametrize("name", sorted(SCHEMES))
    def test_matches_dense_oracle(self, name):
        rng = np.random.default_rng(17)
        g, pairs = random_graph(rng)
        scheme = SCHEMES[name]
        got = normalize(g, scheme).to_dense()
        want = oracles.dense_operator(pairs, g.num_users, g.num_items,
                                      side=scheme.side, norm=scheme.norm)
        assert np.max(np.abs(got - want)) <= 1e-12

    @pytest.mark.parametrize("name", ["sym-sqrt", "sym-l1"])
    def test_symmetric_schemes_symmetric_matrix(self, name):
        rng = np.random.default_rng(23)
        g, _ = random_graph(rng)
        m = normalize(g, SCHEMES[name]).to_dense()
        assert np.max(np.abs(m - m.T)) == 0.0

    def test_no_self_loops_or_same_side_edges(self):
        rng = np.random.default_rng(29)
        g, _ = random_graph(rng)
        m = normalize(g, scheme_by_name("sym-sqrt")).to_dense()
        nu = g.num_users
        assert np.max(np.abs(np.diag(m))) == 0.0
        assert np.max(np.abs(m[:nu, :nu])) == 0.0
        assert np.max(np.abs(m[nu:, nu:])) == 0.0

    def test_self_loop_variant_matches_oracle(self):
        rng = np.random.default_rng(31)
        g, pairs = random_graph(rng)
        got = normalize(g, scheme_by_name("sym-sqrt"), self_loops=True).to_dense()
        want = oracles.dense_operator(pairs, g.num_users, g.num_items,
                                      self_loops=True)
        assert np.max(np.abs(got - want)) <= 1e-12

    def test_bad_scheme_name(self):
        with pytest.raises(ValueError, match="unknown scheme"):
            scheme_by_name("l2-both")
        with pytest.raises(ValueError):
            NormScheme("up", "sqrt")


class TestSpmv:
    def test_identity_single_edge(self):
        g = build_graph(make_dataset([(0, 0)], 1, 1))
        adj = normalize(g, scheme_by_name("sym-sqrt"))
        x = np.zeros((2, 2))
        x[1] = (1.0, 0.0)
        y = spmv(adj, x)
        assert np.allclose(y[0], (1.0, 0.0))

    def test_toy_value(self):
        adj = normalize(toy_graph(), scheme_by_name("sym-sqrt"))
        x = np.zeros((4, 2))
        x[2] = (1.0, 0.0)  # i0
        x[3] = (0.0, 1.0)  # i1
        y = spmv(adj, x)
        assert y[0] == pytest.approx((0.5, 1 / np.sqrt(2)), abs=1e-12)

    def test_zero_in_zero_out(self):
        adj = normalize(toy_graph(), scheme_by_name("sym-sqrt"))
        assert np.all(spmv(adj, np.zeros((4, 3))) == 0.0)

    def test_dimension_mismatch(self):
        adj = normalize(toy_graph(), scheme_by_name("sym-sqrt"))
        with pytest.raises(ValueError, match="rows"):
            spmv(adj, np.zeros((5, 2)))

    @pytest.mark.parametrize("name", sorted(SCHEMES))
    def test_equivalent_to_dense_oracle(self, name):
        rng = np.random.default_rng(41)
        g, pairs = random_graph(rng, num_users=20, num_items=25)
        scheme = SCHEMES[name]
        adj = normalize(g, scheme)
        dense = oracles.dense_operator(pairs, 20, 25, scheme.side, scheme.norm)
        x = rng.normal(size=(45, 6))
        assert np.max(np.abs(spmv(adj, x) - dense @ x)) <= 1e-12

    def test_linearity(self):
        rng = np.random.default_rng(43)
        g, _ = random_graph(rng)
        adj = normalize(g, scheme_by_name("sym-sqrt"))
        x = rng.normal(size=(g.num_users + g.num_items, 4))
        z = rng.normal(size=x.shape)
        a, b = 1.7, -0.4
        lhs = spmv(adj, a * x + b * z)
        rhs = a * spmv(adj, x) + b * spmv(adj, z)
        scale = np.max(np.abs(rhs)) or 1.0
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale

    def test_symmetric_adjoint(self):
        rng = np.random.default_rng(47)
        g, _ = random_graph(rng)
        for name in ("sym-sqrt", "sym-l1"):
            adj = normalize(g, SCHEMES[name])
            x = rng.normal(size=(g.num_users + g.num_items, 3))
            z = rng.normal(size=x.shape)
            lhs = np.sum(spmv(adj, x) * z)
            rhs = np.sum(x * spmv(adj, z))
            assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)

    def test_transpose_matches_dense(self):
        rng = np.random.default_rng(53)
        g, pairs = random_graph(rng)
        scheme = SCHEMES["left-l1"]
        adj = normalize(g, scheme)
        dense = oracles.dense_operator(pairs, g.num_users, g.num_items,
                                       scheme.side, scheme.norm)
        x = rng.normal(size=(g.num_users + g.num_items, 3))
        assert np.max(np.abs(spmv_transpose(adj, x) - dense.T @ x)) <= 1e-12


def test_dump_operator_triples(tmp_path):
    adj = normalize(toy_graph(), scheme_by_name("sym-sqrt"))
    path = tmp_path / "op.txt"
    dump_operator(adj, str(path))
    rows = [line.split() for line in path.read_text().splitlines()]
    assert len(rows) == 6  # three edges, both directions
    parsed = {(int(r), int(c)): float(w) for r, c, w in rows}
    assert parsed[(0, 2)] == pytest.approx(0.5)
    assert parsed[(2, 0)] == pytest.approx(0.5)

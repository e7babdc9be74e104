import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aste_grid import autodiff as ad
from aste_grid.corpus import DependencyArc, Sentence, generate_synthetic
from aste_grid.encoder import LstmCellParams, lstm_step
from aste_grid.textgraph import (DEPENDENCY, NEIGHBOR, SELF, GnnStack, SageLayerParams,
                                 aggregate_lstm, aggregate_mean, build_graph, gnn_encode,
                                 neighbor_sequences, sage_layer)


def graph(n, arcs=()):
    return build_graph(Sentence(["w"] * n), [DependencyArc(h, d, "dep") for h, d in arcs])


def test_three_nodes_one_arc():
    g = graph(3, [(0, 2)])
    assert set(g.neighbors[0]) == {(0, SELF), (1, NEIGHBOR), (2, DEPENDENCY)}
    assert set(g.neighbors[2]) == {(2, SELF), (1, NEIGHBOR), (0, DEPENDENCY)}
    assert set(g.neighbors[1]) == {(1, SELF), (0, NEIGHBOR), (2, NEIGHBOR)}


def test_single_node():
    assert graph(1).neighbors == (((0, SELF),),)


def test_fig1_friendly_sees_waiters(fig2):
    g = build_graph(fig2.sentence, fig2.deps)
    assert (0, DEPENDENCY) in g.neighbors[2]
    # the conj arc links the two opinions across the sentence
    assert (9, DEPENDENCY) in g.neighbors[2]


def test_dependency_on_adjacent_pair_deduplicates_nodes():
    g = graph(3, [(0, 1)])
    assert (1, NEIGHBOR) in g.neighbors[0] and (1, DEPENDENCY) in g.neighbors[0]
    assert g.nodes_of(0) == [0, 1]


def test_out_of_range_arc():
    with pytest.raises(IndexError):
        graph(2, [(0, 2)])


@given(st.integers(1, 9).flatmap(lambda n: st.tuples(
    st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=12))))
@settings(max_examples=100, deadline=None)
def test_graph_invariants(arg):
    n, arcs = arg
    arcs = [(h, d) for h, d in arcs if h != d]
    g = graph(n, arcs)
    for v in range(n):
        kinds = g.neighbors[v]
        assert kinds.count((v, SELF)) == 1
        assert len(set(kinds)) == len(kinds)
        for u, kind in kinds:
            assert (v, kind) in g.neighbors[u]  # bidirectional
        for u in (v - 1, v + 1):
            if 0 <= u < n:
                assert (u, NEIGHBOR) in kinds


def test_aggregate_mean():
    f = np.array([1.0, -2.0, 3.0])
    np.testing.assert_array_equal(aggregate_mean([f, f, f]), f)
    np.testing.assert_array_equal(aggregate_mean([np.array([1.0, 0.0]), np.array([0.0, 1.0])]),
                                  [0.5, 0.5])
    rng = np.random.default_rng(0)
    vecs = [rng.normal(size=4) for _ in range(5)]
    oracle = [sum(v[k] for v in vecs) / 5 for k in range(4)]
    np.testing.assert_allclose(aggregate_mean(vecs), oracle, rtol=1e-14)


def test_aggregate_lstm_single_neighbor_is_one_step():
    rng = np.random.default_rng(1)
    p = LstmCellParams.init(3, 3, rng)
    f = rng.normal(size=3)
    h, _ = lstm_step(p, f, np.zeros(3), np.zeros(3))
    out = aggregate_lstm(p, [f], np.random.default_rng(9))
    np.testing.assert_array_equal(out.data, h.data)


def test_aggregate_lstm_deterministic_and_order_sensitive():
    rng = np.random.default_rng(2)
    p = LstmCellParams.init(3, 3, rng)
    a, b = rng.normal(size=3), rng.normal(size=3)
    x = aggregate_lstm(p, [a, b], np.random.default_rng(5)).data
    y = aggregate_lstm(p, [a, b], np.random.default_rng(5)).data
    np.testing.assert_array_equal(x, y)
    ab = aggregate_lstm(p, [a, b]).data
    ba = aggregate_lstm(p, [b, a]).data
    assert not np.allclose(ab, ba)


def zero_layer(d_in, d_out, aggregator):
    lstm = LstmCellParams.init(d_in, d_in, np.random.default_rng(0)) if aggregator == "lstm" else None
    return SageLayerParams(aggregator, np.zeros((d_out, 2 * d_in)), np.zeros(d_out), lstm)


@pytest.mark.parametrize("agg", ["lstm", "mean"])
def test_zero_weights_give_zero(agg):
    H = np.random.default_rng(0).normal(size=(4, 3))
    out = sage_layer(zero_layer(3, 5, agg), graph(4, [(0, 3)]), H)
    np.testing.assert_array_equal(out.data, 0.0)


@pytest.mark.parametrize("agg", ["lstm", "mean"])
def test_single_node_layer(agg):
    rng = np.random.default_rng(3)
    p = SageLayerParams.init(3, 4, agg, rng)
    h = rng.normal(size=(1, 3))
    out = sage_layer(p, graph(1), h).data[0]
    if agg == "mean":
        a = h[0]
    else:
        a = lstm_step(p.lstm, h[0], np.zeros(3), np.zeros(3))[0].data
        if False:  # the self feature alone is aggregated
            pass
    expected = np.maximum(p.W @ np.concatenate([h[0], a]) + p.b, 0.0)
    np.testing.assert_allclose(out, expected, rtol=1e-13)
    if agg == "mean":
        np.testing.assert_allclose(out, np.maximum(p.W @ np.concatenate([h[0], h[0]]) + p.b, 0),
                                   rtol=1e-13)


def test_mean_layer_chain_oracle():
    rng = np.random.default_rng(4)
    p = SageLayerParams.init(2, 3, "mean", rng)
    p.b[:] = rng.normal(size=3)
    H = rng.normal(size=(3, 2))
    out = sage_layer(p, graph(3), H).data
    hoods = {0: [0, 1], 1: [0, 1, 2], 2: [1, 2]}
    for v in range(3):
        a = [sum(H[u][k] for u in hoods[v]) / len(hoods[v]) for k in range(2)]
        z = [H[v][0], H[v][1], a[0], a[1]]
        for r in range(3):
            pre = sum(p.W[r][c] * z[c] for c in range(4)) + p.b[r]
            assert out[v, r] == pytest.approx(max(pre, 0.0), abs=1e-14)


def test_batched_lstm_matches_per_node_aggregation():
    rng = np.random.default_rng(5)
    p = SageLayerParams.init(3, 4, "lstm", rng)
    p.b[:] = 0.3
    g = graph(6, [(0, 5), (1, 4), (2, 5)])
    H = rng.normal(size=(6, 3))
    out = sage_layer(p, g, H, np.random.default_rng(11)).data
    perm_rng = np.random.default_rng(11)
    for v in range(6):
        feats = [H[u] for u in g.nodes_of(v)]
        a = aggregate_lstm(p.lstm, feats, perm_rng).data
        expected = np.maximum(p.W @ np.concatenate([H[v], a]) + p.b, 0.0)
        np.testing.assert_allclose(out[v], expected, rtol=1e-12, atol=1e-14)


def test_neighbor_sequences_eval_order_is_sorted():
    g = graph(4, [(3, 0)])
    assert neighbor_sequences(g) == [[0, 1, 3], [0, 1, 2], [1, 2, 3], [0, 2, 3]]


@pytest.mark.parametrize("agg", ["lstm", "mean"])
def test_node_locality(agg):
    rng = np.random.default_rng(6)
    p = SageLayerParams.init(3, 4, agg, rng)
    p.b[:] = 1.0  # keep units active so any influence shows
    g = graph(6, [(0, 4)])
    H = rng.normal(size=(6, 3))
    base = sage_layer(p, g, H).data
    for u in range(6):
        H2 = H.copy()
        H2[u] += 0.5
        out = sage_layer(p, g, H2).data
        for v in range(6):
            changed = not np.array_equal(out[v], base[v])
            if u not in g.nodes_of(v):
                assert not changed


def test_mean_permutation_invariance():
    rng = np.random.default_rng(7)
    vecs = [rng.normal(size=3) for _ in range(4)]
    ref = aggregate_mean(vecs)
    for perm in itertools.permutations(range(4)):
        np.testing.assert_allclose(aggregate_mean([vecs[i] for i in perm]), ref, rtol=1e-15)


def test_gnn_stack():
    rng = np.random.default_rng(8)
    stack = GnnStack.init(6, 5, 3, "lstm", rng)
    assert stack.L == 3 and stack.d_out == 5
    s = generate_synthetic(0, 1)[0]
    g = build_graph(s.sentence, s.deps)
    H = rng.normal(size=(s.n, 6))
    out1 = gnn_encode(stack, g, H, np.random.default_rng(3)).data
    out2 = gnn_encode(stack, g, H, np.random.default_rng(3)).data
    np.testing.assert_array_equal(out1, out2)
    assert out1.shape == (s.n, 5)
    one = GnnStack(stack.layers[:1])
    np.testing.assert_array_equal(gnn_encode(one, g, H).data, sage_layer(stack.layers[0], g, H).data)


@pytest.mark.parametrize("agg", ["lstm", "mean"])
def test_sage_layer_gradients(agg):
    rng = np.random.default_rng(9)
    p = SageLayerParams.init(3, 4, agg, rng)
    p.b[:] = rng.normal(size=4)
    g = graph(5, [(0, 3), (4, 1)])
    H = rng.normal(size=(5, 3))
    C = rng.normal(size=(5, 4))
    arrays = {"H": H, "W": p.W, "b": p.b}
    if p.lstm is not None:
        arrays.update(lW=p.lstm.W, lU=p.lstm.U, lb=p.lstm.b)

    def loss(vals):
        lstm = LstmCellParams(vals["lW"], vals["lU"], vals["lb"]) if agg == "lstm" else None
        layer = SageLayerParams(agg, vals["W"], vals["b"], lstm)
        return ad.sum(sage_layer(layer, g, vals["H"]) * C)

    leaves = {k: ad.Tensor(v, requires_grad=True) for k, v in arrays.items()}
    loss(leaves).backward()
    eps = 1e-6
    for k, a in arrays.items():
        for idx in np.ndindex(a.shape):
            orig = a[idx]
            a[idx] = orig + eps
            with ad.record_branches() as b1:
                up = float(loss(arrays).data)
            a[idx] = orig - eps
            with ad.record_branches() as b2:
                down = float(loss(arrays).data)
            a[idx] = orig
            assert b1 == b2
            fd = (up - down) / (2 * eps)
            an = leaves[k].grad[idx]
            assert abs(an - fd) <= 1e-4 * max(abs(an), abs(fd)) + 1e-8, (k, idx)

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from multilayer_bp.graph import NetworkError, build_network, excess_degree, preset_coupling


def test_single_edge_strengths_and_mass():
    net = build_network([(0, 0, 1, 1.0)], "none", 2, 1)
    assert net.strengths.tolist() == [1.0, 1.0]
    assert net.layer_mass.tolist() == [1.0]


def test_temporal_preset_two_layers_two_nodes():
    net = build_network([], "temporal", 2, 2)
    i, j, w = net.inter_edges()
    pairs = sorted(zip(i.tolist(), j.tolist()))
    assert pairs == [(0, 2), (1, 3)]
    assert w.tolist() == [1.0, 1.0]


def test_multiplex_preset_one_node_three_layers_is_triangle():
    net = build_network([], "multiplex", 1, 3)
    i, j, _ = net.inter_edges()
    assert sorted(zip(i.tolist(), j.tolist())) == [(0, 1), (0, 2), (1, 2)]


@pytest.mark.parametrize("n_nodes,n_layers", [(1, 1), (3, 2), (4, 5)])
def test_preset_pair_counts(n_nodes, n_layers):
    temporal = build_network([], "temporal", n_nodes, n_layers)
    multiplex = build_network([], "multiplex", n_nodes, n_layers)
    assert len(temporal.inter_edges()[0]) == n_nodes * (n_layers - 1)
    assert len(multiplex.inter_edges()[0]) == n_nodes * n_layers * (n_layers - 1) // 2


def test_duplicate_edges_are_summed():
    net = build_network([(0, 0, 1, 1.0), (0, 1, 0, 2.5)], "none", 2, 1)
    assert net.intra_adj[0, 1] == 3.5
    assert net.layer_mass[0] == 3.5


@pytest.mark.parametrize("rows,inter,msg", [
    ([(0, 0, 0, 1.0)], "none", "self-loop"),
    ([(0, 0, 5, 1.0)], "none", "node"),
    ([(3, 0, 1, 1.0)], "none", "layer"),
    ([(0, 0, 1, -1.0)], "none", "positive"),
    ([(0, 0, 1, 1.0)], [(0, 1, 1, 1.0)], "different layers"),
])
def test_invalid_inputs_are_rejected(rows, inter, msg):
    with pytest.raises(NetworkError, match=msg):
        build_network(rows, inter, 2, 2)


def test_unknown_preset_is_rejected():
    with pytest.raises((NetworkError, ValueError)):
        preset_coupling("ring", 2, 2)


def test_node_layer_index_convention():
    net = build_network([(1, 0, 2, 1.0)], "none", 3, 2)
    assert net.intra_adj[3, 5] == 1.0
    assert net.layer_of.tolist() == [0, 0, 0, 1, 1, 1]
    assert net.node_of.tolist() == [0, 1, 2, 0, 1, 2]


@pytest.mark.parametrize("d,expected", [(3, 2.0), (5, 4.0)])
def test_excess_degree_of_regular_graph(d, expected):
    # circulant d-regular graph on 12 nodes
    n = 12
    offsets = range(1, d // 2 + 1)
    rows = {(0, min(u, (u + k) % n), max(u, (u + k) % n)) for u in range(n) for k in offsets}
    if d % 2:
        rows |= {(0, u, u + n // 2) for u in range(n // 2)}
    net = build_network(sorted(rows), "none", n, 1)
    assert np.all(net.strengths == d)
    assert excess_degree(net) == pytest.approx(expected, abs=1e-12)


def test_excess_degree_path_of_three():
    net = build_network([(0, 0, 1), (0, 1, 2)], "none", 3, 1)
    # degrees [1, 2, 1]: <d^2> = 2, c = 4/3
    assert excess_degree(net) == pytest.approx(0.5, abs=1e-12)


def test_excess_degree_counts_placeholders():
    net = build_network([(0, 0, 1)], "none", 3, 1)
    # degrees [1, 1, 0]: <d^2> = 2/3, c = 2/3
    assert excess_degree(net) == pytest.approx(0.0, abs=1e-12)


def test_excess_degree_needs_edges():
    with pytest.raises(NetworkError):
        excess_degree(build_network([], "none", 3, 1))


edge_lists = st.lists(
    st.tuples(st.integers(0, 2), st.integers(0, 5), st.integers(0, 5),
              st.floats(0.1, 5.0, allow_nan=False)).filter(lambda r: r[1] != r[2]),
    max_size=30)


@given(edge_lists, st.sampled_from(["none", "temporal", "multiplex"]))
def test_structural_invariants(rows, preset):
    net = build_network(rows, preset, 6, 3)
    A, C = net.intra_adj, net.inter_coup
    assert (A != A.T).nnz == 0 and (C != C.T).nnz == 0
    assert np.all(A.diagonal() == 0) and np.all(C.diagonal() == 0)
    ai, aj = A.nonzero()
    assert np.all(net.layer_of[ai] == net.layer_of[aj])
    ci, cj = C.nonzero()
    assert np.all(net.layer_of[ci] != net.layer_of[cj])
    assert net.strengths.sum() == pytest.approx(2 * net.layer_mass.sum())
    for l in range(3):
        assert net.strengths[net.layer_slice(l)].sum() == pytest.approx(2 * net.layer_mass[l])


@given(edge_lists, st.randoms(use_true_random=False))
def test_edge_order_does_not_matter(rows, rnd):
    shuffled = list(rows)
    rnd.shuffle(shuffled)
    a = build_network(rows, "temporal", 6, 3)
    b = build_network(shuffled, "temporal", 6, 3)
    assert a.same_as(b)
    assert np.array_equal(a.strengths, b.strengths)

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from multilayer_bp import bp
from multilayer_bp.beta_star import beta_grid
from multilayer_bp.generators import dsbm, DsbmParams, erdos_renyi_multilayer
from multilayer_bp.graph import build_network
from multilayer_bp.metrics import ami

from conftest import clique_rows


def directed_edges(state):
    g = state.graph
    return list(zip(g.src.tolist(), g.dst.tolist()))


def scalar_update(net, state, beta, gamma, omega):
    """New messages from the update rule, one scalar at a time."""
    edges = directed_edges(state)
    index = {e: k for k, e in enumerate(edges)}
    A = net.intra_adj.toarray()
    C = net.inter_coup.toarray()
    out = {}
    for (i, k) in edges:
        l = int(net.layer_of[i])
        two_m = 2.0 * net.layer_mass[l]
        vals = []
        for t in range(state.q):
            x = -gamma * beta * net.strengths[i] * state.theta[l][t] / two_m
            for j in range(net.n):
                w = A[i, j] + omega * C[i, j]
                if w == 0 or j == k:
                    continue
                x += math.log(1.0 + state.messages[index[(j, i)]][t] * (math.exp(beta * w) - 1.0))
            vals.append(math.exp(x))
        z = sum(vals)
        out[(i, k)] = [v / z for v in vals]
    return np.array([out[e] for e in edges])


def scalar_bethe(net, state):
    """Bethe free energy, term by term."""
    beta, gamma, omega, q = state.beta, state.gamma, state.omega, state.q
    edges = directed_edges(state)
    index = {e: k for k, e in enumerate(edges)}
    W = (net.intra_adj + omega * net.inter_coup).toarray()
    psi = state.messages
    log_zi = 0.0
    for i in range(net.n):
        l = int(net.layer_of[i])
        z = 0.0
        for t in range(q):
            x = -gamma * beta * net.strengths[i] * state.theta[l][t] / (2.0 * net.layer_mass[l])
            for j in range(net.n):
                if W[i, j] > 0:
                    x += math.log(1.0 + psi[index[(j, i)]][t] * (math.exp(beta * W[i, j]) - 1.0))
            z += math.exp(x)
        log_zi += math.log(z)
    log_zij = 0.0
    for (i, j) in edges:
        if i < j:
            z = sum(math.exp(beta * W[i, j] * (s == t)) * psi[index[(i, j)]][s] * psi[index[(j, i)]][t]
                    for s in range(q) for t in range(q))
            log_zij += math.log(z)
    field = sum(gamma * beta / (4.0 * net.layer_mass[l]) * sum(th * th for th in state.theta[l])
                for l in range(net.n_layers))
    return -(log_zi - log_zij + field) / (net.n * beta)


def scalar_theta(net, messages_by_edge, state, beta, omega):
    """Field from marginals whose null term cancels (t-independent start)."""
    edges = directed_edges(state)
    W = (net.intra_adj + omega * net.inter_coup).toarray()
    theta = np.zeros((net.n_layers, state.q))
    for i in range(net.n):
        vals = []
        for t in range(state.q):
            x = 0.0
            for (j, k), m in zip(edges, messages_by_edge):
                if k == i:
                    x += math.log(1.0 + m[t] * (math.exp(beta * W[j, i]) - 1.0))
            vals.append(math.exp(x))
        z = sum(vals)
        theta[net.layer_of[i]] += net.strengths[i] * np.array(vals) / z
    return theta


def with_messages(net, q, beta, gamma, omega, messages):
    state = bp.init_uniform(net, q, beta, gamma, omega)
    state.messages = np.array(messages, dtype=float)
    state.theta = scalar_theta(net, state.messages, state, beta, omega)
    return state


def two_layer_toy():
    rows = [(0, 0, 1, 1.0), (0, 1, 2, 2.0), (1, 0, 1, 1.0), (1, 0, 2, 1.5)]
    return build_network(rows, "temporal", 3, 2)


# -- initialisation -----------------------------------------------------------

def test_uniform_init_without_noise(two_triangles):
    state = bp.init_uniform(two_triangles, 3, 1.0, 1.0, 0.0)
    assert np.all(state.messages == 1 / 3)
    assert state.theta == pytest.approx(np.full((1, 3), 2 * 7 / 3), abs=1e-12)


def test_noisy_init_is_deterministic(two_triangles):
    a = bp.init_uniform(two_triangles, 3, 1.0, 1.0, 0.0, noise=0.1, seed=4)
    b = bp.init_uniform(two_triangles, 3, 1.0, 1.0, 0.0, noise=0.1, seed=4)
    assert np.array_equal(a.messages, b.messages)
    assert np.array_equal(a.theta, b.theta)


def test_single_edge_has_two_messages():
    net = build_network([(0, 0, 1)], "none", 2, 1)
    assert bp.init_uniform(net, 2, 1.0).messages.shape == (2, 2)


def test_partition_init_factor_five():
    net = build_network([(0, 0, 1)], "none", 2, 1)
    state = bp.init_from_partition(net, 2, 1.0, 1.0, 0.0, [0, 1], 5.0)
    into_0 = state.graph.dst == 0
    assert state.messages[into_0][0] == pytest.approx([5 / 6, 1 / 6], abs=1e-15)
    assert state.messages[~into_0][0] == pytest.approx([1 / 6, 5 / 6], abs=1e-15)


def test_partition_init_factor_three_q_three():
    net = build_network([(0, 0, 1)], "none", 2, 1)
    state = bp.init_from_partition(net, 3, 1.0, 1.0, 0.0, [2, 2], 3.0)
    assert state.messages == pytest.approx(np.tile([0.2, 0.2, 0.6], (2, 1)), abs=1e-15)


def test_partition_init_near_one_is_near_uniform():
    net = build_network([(0, 0, 1)], "none", 2, 1)
    state = bp.init_from_partition(net, 2, 1.0, 1.0, 0.0, [0, 1], 1.0 + 1e-9)
    assert state.messages == pytest.approx(0.5, abs=1e-9)


def test_partition_init_rejects_weak_factor():
    net = build_network([(0, 0, 1)], "none", 2, 1)
    with pytest.raises(ValueError):
        bp.init_from_partition(net, 2, 1.0, 1.0, 0.0, [0, 1], 1.0)


# -- sweep ----------------------------------------------------------------------

def test_isolated_message_stays_uniform_without_field():
    net = build_network([(0, 0, 1)], "none", 2, 1)
    state = bp.init_uniform(net, 2, 1.0, gamma=0.0, noise=0.3, seed=1)
    bp.sweep(state, net, "synchronous")
    assert state.messages == pytest.approx(0.5, abs=1e-15)


def test_triangle_sweep_matches_scalar_oracle(triangle):
    state = with_messages(triangle, 2, 1.0, 1.0, 0.0, np.tile([0.6, 0.4], (6, 1)))
    expected = scalar_update(triangle, state, 1.0, 1.0, 0.0)
    bp.sweep(state, triangle, "synchronous")
    assert np.max(np.abs(state.messages - expected)) < 1e-12


def test_weighted_two_layer_sweep_matches_scalar_oracle():
    net = two_layer_toy()
    rng = np.random.default_rng(3)
    state = bp.init_uniform(net, 3, 0.8, 1.3, 0.7)
    msgs = rng.dirichlet(np.ones(3), size=state.graph.n_messages)
    state = with_messages(net, 3, 0.8, 1.3, 0.7, msgs)
    expected = scalar_update(net, state, 0.8, 1.3, 0.7)
    bp.sweep(state, net, "synchronous")
    assert np.max(np.abs(state.messages - expected)) < 1e-12


@given(st.floats(0.05, 4.0), st.floats(0.0, 3.0), st.floats(0.0, 3.0), st.integers(2, 6),
       st.sampled_from(bp.SCHEDULES))
def test_factorized_point_is_fixed(beta, gamma, omega, q, schedule):
    net = two_layer_toy()
    state = bp.init_uniform(net, q, beta, gamma, omega)
    _, change = bp.sweep(state, net, schedule)
    assert change < 1e-14


@given(st.integers(0, 10**6), st.floats(0.1, 3.0), st.sampled_from(bp.SCHEDULES))
def test_rows_stay_normalised(seed, beta, schedule):
    net = two_layer_toy()
    state = bp.init_uniform(net, 3, beta, 1.0, 1.0, noise=0.4, seed=seed)
    for _ in range(3):
        bp.sweep(state, net, schedule)
    assert np.allclose(state.messages.sum(axis=1), 1.0, atol=1e-9)
    assert np.allclose(state.marginals.sum(axis=1), 1.0, atol=1e-9)


@given(st.integers(0, 10**6), st.permutations(range(3)))
def test_relabelling_the_start_permutes_the_result(seed, perm):
    net, _ = dsbm(DsbmParams(12, 2, 2, 4.0, 0.2, 1.0, seed=1))
    perm = list(perm)
    a = bp.init_uniform(net, 3, 1.2, 1.0, 0.5, noise=0.3, seed=seed)
    b = a.copy()
    b.messages = b.messages[:, perm]
    b.marginals = b.marginals[:, perm]
    b.theta = b.theta[:, perm]
    for _ in range(5):
        bp.sweep(a, net)
        bp.sweep(b, net)
    assert np.max(np.abs(a.marginals[:, perm] - b.marginals)) < 1e-12
    assert bp.bethe_free_energy(a, net) == pytest.approx(bp.bethe_free_energy(b, net), abs=1e-12)


def test_zero_coupling_decouples_layers():
    net, _ = dsbm(DsbmParams(30, 3, 2, 5.0, 0.2, 0.7, seed=5))
    start = np.random.default_rng(0).integers(2, size=net.n)
    whole = bp.init_from_partition(net, 2, 1.0, 1.0, 0.0, start, 3.0)
    for _ in range(60):
        bp.sweep(whole, net, "synchronous")
    for l in range(net.n_layers):
        sub = net.layer_network(l)
        part = bp.init_from_partition(sub, 2, 1.0, 1.0, 0.0, start[net.layer_slice(l)], 3.0)
        for _ in range(60):
            bp.sweep(part, sub, "synchronous")
        assert np.max(np.abs(whole.marginals[net.layer_slice(l)] - part.marginals)) < 1e-8


def test_unknown_schedule_rejected(triangle):
    with pytest.raises(ValueError):
        bp.sweep(bp.init_uniform(triangle, 2, 1.0), triangle, "parallel")


def test_placeholder_node_layer_keeps_uniform_marginal():
    net = build_network([(0, 0, 1)], "none", 3, 1)
    state = bp.init_uniform(net, 2, 1.0, noise=0.3, seed=0)
    for _ in range(3):
        bp.sweep(state, net)
    assert state.marginals[2] == pytest.approx([0.5, 0.5], abs=1e-15)


# -- Bethe free energy -----------------------------------------------------------

def test_bethe_uniform_triangle_matches_scalar(triangle):
    state = bp.init_uniform(triangle, 2, 1.0, 1.0, 0.0)
    assert bp.bethe_free_energy(state, triangle) == pytest.approx(scalar_bethe(triangle, state),
                                                                  abs=1e-12)


@pytest.mark.parametrize("gamma,omega", [(1.0, 0.0), (1.0, 1.0), (0.6, 2.0)])
def test_bethe_random_messages_match_scalar(gamma, omega):
    net = two_layer_toy()
    rng = np.random.default_rng(8)
    state = bp.init_uniform(net, 3, 0.9, gamma, omega, noise=0.4, seed=2)
    state.messages = rng.dirichlet(np.ones(3), size=state.graph.n_messages)
    state.theta = rng.uniform(0.5, 3.0, size=state.theta.shape)
    assert abs(bp.bethe_free_energy(state, net) - scalar_bethe(net, state)) < 1e-12


# -- full runs -------------------------------------------------------------------

def test_two_cliques_are_retrieved_at_threshold():
    net = build_network(clique_rows(range(5)) + clique_rows(range(5, 10)), "none", 10, 1)
    beta = beta_grid(net, 0.0, 2)[0]
    res = bp.run(bp.init_uniform(net, 2, beta, 1.0, 0.0, noise=0.1, seed=0), net, max_iters=2000)
    assert res.converged
    assert ami([0] * 5 + [1] * 5, res.retrieval_partition) == 1.0


def test_random_graph_below_threshold_is_trivial():
    net = erdos_renyi_multilayer(200, 1, 4.0, coupling="none", seed=1)
    beta = 0.5 * beta_grid(net, 0.0, 2)[0]
    res = bp.run(bp.init_uniform(net, 2, beta, 1.0, 0.0, noise=0.1, seed=1), net, tol=1e-8)
    assert res.converged
    assert np.max(np.abs(res.marginals - 0.5)) < 1e-4


def test_random_graph_above_threshold_does_not_converge():
    net = erdos_renyi_multilayer(200, 1, 4.0, coupling="none", seed=1)
    beta = 1.5 * beta_grid(net, 0.0, 2)[0]
    res = bp.run(bp.init_uniform(net, 2, beta, 1.0, 0.0, noise=0.1, seed=1), net, max_iters=500)
    assert not res.converged
    assert res.retrieval_partition is not None


def test_run_result_summary_fields(two_triangles):
    res = bp.run(bp.init_uniform(two_triangles, 2, 1.0, 1.0, 0.0, seed=0), two_triangles)
    assert set(res.summary()) == {"converged", "iterations", "beta", "gamma", "omega", "q_effective",
                                  "retrieval_modularity", "bethe_free_energy", "mean_entropy", "seed"}


def test_run_rejects_non_positive_tol(two_triangles):
    with pytest.raises(ValueError):
        bp.run(bp.init_uniform(two_triangles, 2, 1.0), two_triangles, tol=0.0)


def test_ties_are_broken_by_the_rng():
    marg = np.full((2000, 2), 0.5)
    labels = bp.retrieval_partition(marg, np.random.default_rng(0)).labels
    assert 900 < labels.sum() < 1100


def test_reported_modularity_matches_partition_score(two_triangles):
    from multilayer_bp.metrics import modularity
    res = bp.run(bp.init_uniform(two_triangles, 3, 1.5, 0.8, 0.0, noise=0.2, seed=3), two_triangles)
    assert res.retrieval_modularity == pytest.approx(
        modularity(two_triangles, res.retrieval_partition, 0.8, 0.0), abs=1e-9)

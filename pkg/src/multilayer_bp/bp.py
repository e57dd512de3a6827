"""Belief propagation over the multilayer-modularity Boltzmann ensemble.

Messages live on the directed edges of the combined weight matrix
``A + omega C``.  The update for the message from node-layer ``i`` to ``k``
is

    psi^{i->k}_t  ∝  exp[ -gamma beta d_i theta^{l_i}_t / (2 m_{l_i})
                         + sum_{j in N(i) \\ k} log(1 + psi^{j->i}_t (e^{beta W_ij} - 1)) ]

with the per-layer field ``theta^l_t = sum_{j in layer l} d_j psi^j_t``.
Under the asynchronous schedule the field tracks every marginal update as
it happens; the synchronous schedule holds it fixed for the whole pass.
Marginals use the same expression without the excluded neighbour.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from ._kernels import BIG_EXPONENT, incoming_totals, sweep_kernel
from .graph import MultilayerNetwork
from .metrics import Partition, as_labels, marginal_entropy, modularity

logger = logging.getLogger(__name__)

SCHEDULES = ("random_async", "synchronous")
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITERS = 2000


class NonFiniteError(FloatingPointError):
    def __init__(self, edge: int, detail: str = ""):
        super().__init__(f"non-finite message update on directed edge {edge}{detail}")
        self.edge = edge


@dataclass
class MessageGraph:
    """Directed supra-edges grouped by source node-layer (CSR layout)."""

    ptr: np.ndarray
    dst: np.ndarray
    rev: np.ndarray
    weight: np.ndarray

    @classmethod
    def from_network(cls, net: MultilayerNetwork, omega: float) -> "MessageGraph":
        w = net.supra_weights(omega)
        w.sort_indices()
        ptr = w.indptr.astype(np.int64)
        dst = w.indices.astype(np.int64)
        src = np.repeat(np.arange(net.n, dtype=np.int64), np.diff(ptr))
        # symmetric pattern: the k-th entry in (dst, src) order is the reverse of entry k
        rev = np.lexsort((src, dst)).astype(np.int64)
        return cls(ptr, dst, rev, w.data.astype(float))

    @property
    def src(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.ptr) - 1), np.diff(self.ptr))

    @property
    def n_messages(self) -> int:
        return len(self.dst)


@dataclass
class BeliefState:
    q: int
    beta: float
    gamma: float
    omega: float
    graph: MessageGraph
    messages: np.ndarray
    marginals: np.ndarray
    theta: np.ndarray
    seed: int | None = None
    damping: float = 0.0
    theta_updates: str = "incremental"
    iter_count: int = 0
    converged: bool = False
    last_delta: float = math.inf
    rng: np.random.Generator = field(default=None, repr=False)

    def __post_init__(self):
        if self.rng is None:
            self.rng = np.random.default_rng(self.seed)

    def copy(self) -> "BeliefState":
        return BeliefState(self.q, self.beta, self.gamma, self.omega, self.graph,
                           self.messages.copy(), self.marginals.copy(), self.theta.copy(),
                           self.seed, self.damping, self.theta_updates, self.iter_count, self.converged,
                           self.last_delta, np.random.default_rng(self.seed))


@dataclass
class RunResult:
    converged: bool
    iterations: int
    retrieval_partition: Partition
    retrieval_modularity: float
    bethe_free_energy: float
    q_effective: int
    mean_entropy: float
    parameters: dict
    marginals: np.ndarray = field(repr=False, default=None)
    last_delta: float = math.nan

    @property
    def nontrivial(self) -> bool:
        return self.q_effective >= 2

    def summary(self) -> dict:
        p = self.parameters
        return {
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "beta": float(p["beta"]),
            "gamma": float(p["gamma"]),
            "omega": float(p["omega"]),
            "q_effective": int(self.q_effective),
            "retrieval_modularity": float(self.retrieval_modularity),
            "bethe_free_energy": float(self.bethe_free_energy),
            "mean_entropy": float(self.mean_entropy),
            "seed": p.get("seed"),
        }


# -- internals --------------------------------------------------------------

def _edge_exponents(state: BeliefState):
    a = state.beta * state.graph.weight
    em1 = np.where(a < BIG_EXPONENT, np.expm1(np.minimum(a, BIG_EXPONENT)), np.inf)
    return a, em1


def _field_coef(state: BeliefState, net: MultilayerNetwork) -> np.ndarray:
    mass = net.layer_mass[net.layer_of]
    coef = np.zeros(net.n)
    ok = mass > 0
    coef[ok] = state.gamma * state.beta * net.strengths[ok] / (2.0 * mass[ok])
    return coef


def compute_theta(net: MultilayerNetwork, marginals: np.ndarray) -> np.ndarray:
    weighted = net.strengths[:, None] * marginals
    return weighted.reshape(net.n_layers, net.n_nodes, -1).sum(axis=1)


def _log_totals(state: BeliefState, net: MultilayerNetwork) -> np.ndarray:
    a, em1 = _edge_exponents(state)
    g = state.graph
    return incoming_totals(g.ptr, g.rev, a, em1, state.messages,
                           _field_coef(state, net), net.layer_of.astype(np.int64), state.theta)


def _normalise_rows(x):
    return x / x.sum(axis=1, keepdims=True)


def _new_state(net, q, beta, gamma, omega, messages, graph, seed, damping) -> BeliefState:
    if q < 2:
        raise ValueError("q must be at least 2")
    theta = np.outer(2.0 * net.layer_mass, np.full(q, 1.0 / q))
    state = BeliefState(q, float(beta), float(gamma), float(omega), graph, messages,
                        np.full((net.n, q), 1.0 / q), theta, seed, damping)
    # with a t-independent field the marginals follow from the messages alone
    totals = _log_totals(state, net)
    state.marginals = np.exp(totals - logsumexp(totals, axis=1, keepdims=True))
    state.theta = compute_theta(net, state.marginals)
    return state


# -- public API -------------------------------------------------------------

def init_uniform(net: MultilayerNetwork, q: int, beta: float, gamma: float = 1.0,
                 omega: float = 0.0, noise: float = 0.0, seed: int | None = None,
                 damping: float = 0.0) -> BeliefState:
    """Factorized start ``psi = 1/q`` with optional seeded multiplicative noise."""
    if q < 2:
        raise ValueError("q must be at least 2")
    if not 0 <= noise < 0.5:
        raise ValueError("noise must lie in [0, 0.5)")
    graph = MessageGraph.from_network(net, omega)
    rng = np.random.default_rng(seed)
    msg = np.ones((graph.n_messages, q))
    if noise > 0:
        msg *= 1.0 + noise * rng.uniform(-1.0, 1.0, size=msg.shape)
    return _new_state(net, q, beta, gamma, omega, _normalise_rows(msg), graph, seed, damping)


def init_from_partition(net: MultilayerNetwork, q: int, beta: float, gamma: float,
                        omega: float, part, strength_factor: float = 5.0,
                        seed: int | None = None, damping: float = 0.0) -> BeliefState:
    """Soft start from hard labels.

    Every message arriving at a node-layer is ``strength_factor`` times
    larger on that node-layer's own community than elsewhere.
    """
    labels = as_labels(part)
    if len(labels) != net.n:
        raise ValueError("partition must label every node-layer")
    if strength_factor <= 1:
        raise ValueError("strength_factor must exceed 1")
    if labels.max() >= q:
        raise ValueError(f"partition uses label {labels.max()} but q={q}")
    graph = MessageGraph.from_network(net, omega)
    msg = np.ones((graph.n_messages, q))
    msg[np.arange(graph.n_messages), labels[graph.dst]] = strength_factor
    return _new_state(net, q, beta, gamma, omega, _normalise_rows(msg), graph, seed, damping)


def sweep(state: BeliefState, net: MultilayerNetwork, schedule: str = "random_async"):
    """One pass over all messages; returns ``(state, max_change)``.

    ``random_async`` visits node-layers in a fresh random order and updates
    in place; ``synchronous`` computes every new message from the previous
    sweep's messages.  Asynchronous passes move the layer fields along with
    each marginal; both schedules recompute them exactly once the pass
    completes, which also clears accumulated rounding.
    """
    if schedule not in SCHEDULES:
        raise ValueError(f"unknown schedule {schedule!r}")
    g = state.graph
    a, em1 = _edge_exponents(state)
    coef = _field_coef(state, net)
    layer_of = net.layer_of.astype(np.int64)
    scratch = np.empty((max(1, int(np.diff(g.ptr).max(initial=0))), state.q))
    if schedule == "random_async":
        order = state.rng.permutation(net.n).astype(np.int64)
        out = state.messages
    else:
        order = np.arange(net.n, dtype=np.int64)
        out = np.empty_like(state.messages)
    incremental = schedule == "random_async" and state.theta_updates == "incremental"
    change, bad = sweep_kernel(order, g.ptr, g.dst, g.rev, a, em1, state.messages, out,
                               state.marginals, coef, layer_of, state.theta,
                               state.damping, scratch, net.strengths, incremental)
    if bad != -1:
        if bad >= 0:
            raise NonFiniteError(int(bad))
        raise NonFiniteError(-1, f" (isolated node-layer {-2 - int(bad)})")
    state.messages = out
    state.theta = compute_theta(net, state.marginals)
    state.iter_count += 1
    state.last_delta = float(change)
    return state, float(change)


def retrieval_partition(marginals: np.ndarray, rng: np.random.Generator, rtol: float = 1e-10) -> Partition:
    """Per-row argmax with ties broken uniformly at random."""
    best = marginals.max(axis=1, keepdims=True)
    tied = marginals >= best - rtol * np.abs(best)
    # random scores restricted to tied entries pick one uniformly
    scores = np.where(tied, rng.random(marginals.shape), -1.0)
    return Partition(scores.argmax(axis=1))


def bethe_free_energy(state: BeliefState, net: MultilayerNetwork) -> float:
    """Bethe free energy per node-layer of the current messages.

    ``f = -(sum_i log Z_i - sum_edges log Z_ij + sum_l gamma beta/(4 m_l) sum_t theta_lt^2) / (n beta)``
    where ``Z_ij = 1 + (e^{beta W_ij} - 1) sum_t psi^{i->j}_t psi^{j->i}_t``
    runs over undirected intra- and interlayer edges.
    """
    log_z_nodes = logsumexp(_log_totals(state, net), axis=1)
    g = state.graph
    src = g.src
    once = src < g.dst
    a = state.beta * g.weight[once]
    overlap = np.sum(state.messages[once] * state.messages[g.rev[once]], axis=1)
    big = a >= BIG_EXPONENT
    log_z_edges = np.empty(len(a))
    log_z_edges[~big] = np.log1p(np.expm1(a[~big]) * overlap[~big])
    log_z_edges[big] = a[big] + np.log(overlap[big] + np.exp(-a[big]) * (1.0 - overlap[big]))
    field = 0.0
    for l, m in enumerate(net.layer_mass):
        if m > 0:
            field += state.gamma * state.beta / (4.0 * m) * float(np.sum(state.theta[l] ** 2))
    total = float(np.sum(log_z_nodes)) - float(np.sum(log_z_edges)) + field
    return -total / (net.n * state.beta)


def run(state: BeliefState, net: MultilayerNetwork, tol: float = DEFAULT_TOL,
        max_iters: int = DEFAULT_MAX_ITERS, schedule: str = "random_async") -> RunResult:
    """Sweep until the largest message change drops below ``tol``.

    Hitting ``max_iters`` is reported as ``converged=False``; the result is
    still built from the final marginals.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    state.converged = False
    for _ in range(max_iters):
        _, change = sweep(state, net, schedule)
        if change < tol:
            state.converged = True
            break
    return summarize(state, net)


def summarize(state: BeliefState, net: MultilayerNetwork, marginals: np.ndarray | None = None,
              partition: Partition | None = None) -> RunResult:
    """Package a state (optionally with post-processed marginals/partition) as a result."""
    marg = state.marginals if marginals is None else marginals
    part = partition if partition is not None else retrieval_partition(marg, state.rng)
    _, mean_h = marginal_entropy(marg)
    return RunResult(
        converged=state.converged,
        iterations=state.iter_count,
        retrieval_partition=part,
        retrieval_modularity=modularity(net, part, state.gamma, state.omega),
        bethe_free_energy=bethe_free_energy(state, net),
        q_effective=part.q_effective,
        mean_entropy=mean_h,
        parameters={"beta": state.beta, "gamma": state.gamma, "omega": state.omega,
                    "q": state.q, "seed": state.seed},
        marginals=marg.copy(),
        last_delta=state.last_delta,
    )

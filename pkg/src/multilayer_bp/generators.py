"""Synthetic benchmark networks with planted multilayer partitions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import MultilayerNetwork, build_network
from .metrics import Partition


class InfeasibleParameters(ValueError):
    pass


@dataclass(frozen=True)
class DsbmParams:
    n: int
    layers: int
    q_true: int
    c_avg: float
    epsilon: float
    eta: float
    seed: int | None = None

    def __post_init__(self):
        if not 0 <= self.epsilon <= 1 or not 0 <= self.eta <= 1:
            raise InfeasibleParameters("epsilon and eta must lie in [0, 1]")
        if not 0 < self.c_avg < self.n:
            raise InfeasibleParameters("need 0 < c_avg < n")


@dataclass(frozen=True)
class DirichletDcsbmParams:
    n: int
    layers: int
    q: int = 5
    theta: float = 1.0
    p: float = 0.9
    mu: float = 0.5
    eta_k: float = -2.0
    k_min: float = 3.0
    k_max: float = 30.0
    coupling: str = "temporal"
    n_blocks: int = 1
    seed: int | None = None

    def __post_init__(self):
        if not 0 <= self.mu <= 1 or not 0 <= self.p <= 1:
            raise InfeasibleParameters("mu and p must lie in [0, 1]")
        if not 0 < self.k_min <= self.k_max < self.n:
            raise InfeasibleParameters("need 0 < k_min <= k_max < n")
        if self.coupling not in ("temporal", "multiplex", "block"):
            raise InfeasibleParameters(f"unknown coupling {self.coupling!r}")
        if self.coupling == "block" and not 1 <= self.n_blocks <= self.layers:
            raise InfeasibleParameters("n_blocks must lie in [1, layers]")


def planted_probabilities(sizes, c_avg: float, epsilon: float):
    """``(p_in, p_out)`` giving mean degree ``c_avg`` with ``p_out = epsilon * p_in``."""
    sizes = np.asarray(sizes, dtype=float)
    n = sizes.sum()
    pairs = np.sum(sizes * ((sizes - 1) + epsilon * (n - sizes)))
    if pairs <= 0:
        raise InfeasibleParameters("no node pairs available for edges")
    p_in = c_avg * n / pairs
    if p_in > 1:
        raise InfeasibleParameters(f"p_in={p_in:.3f} exceeds 1")
    return p_in, epsilon * p_in


def _sbm_edges(labels, p_in, p_out, rng):
    n = len(labels)
    prob = np.where(labels[:, None] == labels[None, :], p_in, p_out)
    hit = np.triu(rng.random((n, n)) < prob, k=1)
    u, v = np.nonzero(hit)
    return u, v


def _layer_edge_rows(layer, u, v):
    return np.column_stack([np.full(len(u), layer), u, v, np.ones(len(u))])


def planted_partition_sbm(n: int, q: int, c_avg: float, epsilon: float, sizes=None,
                          seed: int | None = None):
    """Single-layer planted-partition SBM; returns ``(network, planted partition)``."""
    if not 0 <= epsilon <= 1:
        raise InfeasibleParameters("epsilon must lie in [0, 1]")
    if sizes is None:
        sizes = [n // q + (1 if r < n % q else 0) for r in range(q)]
    if sum(sizes) != n or len(sizes) != q:
        raise InfeasibleParameters("sizes must have q entries summing to n")
    labels = np.repeat(np.arange(q), sizes)
    p_in, p_out = planted_probabilities(sizes, c_avg, epsilon)
    rng = np.random.default_rng(seed)
    u, v = _sbm_edges(labels, p_in, p_out, rng)
    net = build_network(_layer_edge_rows(0, u, v), "none", n_nodes=n, n_layers=1)
    return net, Partition(labels)


def dsbm(params: DsbmParams):
    """Dynamic SBM: per-layer SBMs whose labels persist with probability ``eta``.

    Returns ``(network with temporal coupling, planted partition)``.
    """
    rng = np.random.default_rng(params.seed)
    n, q = params.n, params.q_true
    labels = np.empty((params.layers, n), dtype=np.int64)
    labels[0] = rng.integers(q, size=n)
    for l in range(1, params.layers):
        keep = rng.random(n) < params.eta
        labels[l] = np.where(keep, labels[l - 1], rng.integers(q, size=n))
    rows = []
    for l in range(params.layers):
        sizes = np.bincount(labels[l], minlength=q)
        p_in, p_out = planted_probabilities(sizes[sizes > 0], params.c_avg, params.epsilon)
        u, v = _sbm_edges(labels[l], p_in, p_out, rng)
        rows.append(_layer_edge_rows(l, u, v))
    net = build_network(np.vstack(rows), "temporal", n_nodes=n, n_layers=params.layers)
    return net, Partition(labels.ravel())


def truncated_power_law(size, exponent: float, k_min: float, k_max: float, rng) -> np.ndarray:
    """Samples with density proportional to ``k**exponent`` on ``[k_min, k_max]``."""
    u = rng.random(size)
    e = exponent + 1.0
    if abs(e) < 1e-12:
        return k_min * (k_max / k_min) ** u
    lo, hi = k_min ** e, k_max ** e
    return (lo + u * (hi - lo)) ** (1.0 / e)


def truncated_power_law_moment(order: int, exponent: float, k_min: float, k_max: float) -> float:
    """``E[k**order]`` of the truncated power law."""
    def integral(p):
        if abs(p + 1) < 1e-12:
            return np.log(k_max / k_min)
        return (k_max ** (p + 1) - k_min ** (p + 1)) / (p + 1)
    return integral(exponent + order) / integral(exponent)


def _dcsbm_edges(labels, degrees, mu, rng):
    """Poisson multigraph DCSBM collapsed to a simple graph."""
    n = len(labels)
    picks_u, picks_v = [], []
    groups = [np.flatnonzero(labels == c) for c in np.unique(labels)]
    blocks = [(g, (1.0 - mu) * degrees[g].sum() / 2.0) for g in groups]
    blocks.append((np.arange(n), mu * degrees.sum() / 2.0))
    for members, mean_edges in blocks:
        m = rng.poisson(mean_edges)
        if m == 0 or len(members) < 2:
            continue
        prob = degrees[members] / degrees[members].sum()
        picks_u.append(rng.choice(members, size=m, p=prob))
        picks_v.append(rng.choice(members, size=m, p=prob))
    if not picks_u:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    u = np.concatenate(picks_u)
    v = np.concatenate(picks_v)
    keep = u != v
    pairs = np.unique(np.sort(np.column_stack([u[keep], v[keep]]), axis=1), axis=0)
    return pairs[:, 0], pairs[:, 1]


def _copy_or_resample(source, p, weights, rng):
    keep = rng.random(len(source)) < p
    fresh = rng.choice(len(weights), size=len(source), p=weights)
    return np.where(keep, source, fresh)


def dirichlet_labels(params: DirichletDcsbmParams, rng) -> np.ndarray:
    """Layer-by-node labels from the Dirichlet null with interlayer copying."""
    n, L = params.n, params.layers
    weights = rng.dirichlet(np.full(params.q, params.theta))
    labels = np.empty((L, n), dtype=np.int64)
    if params.coupling == "temporal":
        labels[0] = rng.choice(params.q, size=n, p=weights)
        for l in range(1, L):
            labels[l] = _copy_or_resample(labels[l - 1], params.p, weights, rng)
        return labels
    n_blocks = params.n_blocks if params.coupling == "block" else 1
    for block in np.array_split(np.arange(L), n_blocks):
        anchor = rng.choice(block)
        labels[anchor] = rng.choice(params.q, size=n, p=weights)
        for l in block:
            if l != anchor:
                labels[l] = _copy_or_resample(labels[anchor], params.p, weights, rng)
    return labels


def dirichlet_dcsbm(params: DirichletDcsbmParams):
    """Dirichlet-null multilayer partition with DCSBM intralayer edges.

    Returns ``(network, planted partition)``.  ``block`` coupling keeps the
    all-to-all interlayer edges even though labels are independent between
    blocks.
    """
    rng = np.random.default_rng(params.seed)
    labels = dirichlet_labels(params, rng)
    rows = []
    for l in range(params.layers):
        degrees = truncated_power_law(params.n, params.eta_k, params.k_min, params.k_max, rng)
        u, v = _dcsbm_edges(labels[l], degrees, params.mu, rng)
        rows.append(_layer_edge_rows(l, u, v))
    preset = "temporal" if params.coupling == "temporal" else "multiplex"
    net = build_network(np.vstack(rows), preset, n_nodes=params.n, n_layers=params.layers)
    return net, Partition(labels.ravel())


def erdos_renyi_multilayer(n: int, layers: int, c_avg: float, coupling: str = "temporal",
                           seed: int | None = None) -> MultilayerNetwork:
    """Independent G(n, p) layers with ``p = c_avg / (n - 1)``: no planted structure."""
    rng = np.random.default_rng(seed)
    labels = np.zeros(n, dtype=np.int64)
    p = c_avg / (n - 1)
    rows = [_layer_edge_rows(l, *_sbm_edges(labels, p, p, rng)) for l in range(layers)]
    return build_network(np.vstack(rows), coupling, n_nodes=n, n_layers=layers)

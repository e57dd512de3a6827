"""Partition scoring: multilayer modularity, AMI and marginal entropies."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .graph import MultilayerNetwork


@dataclass(frozen=True)
class Partition:
    """Hard community label for every node-layer."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).copy()
        if labels.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        if len(labels) and labels.min() < 0:
            raise ValueError("labels must be non-negative")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.labels)

    def __array__(self, dtype=None, copy=None):
        return self.labels.astype(dtype) if dtype is not None else self.labels.copy()

    @property
    def q_effective(self) -> int:
        return len(np.unique(self.labels))

    def canonical(self) -> "Partition":
        """Relabel densely in order of first appearance."""
        _, first, inv = np.unique(self.labels, return_index=True, return_inverse=True)
        rank = np.argsort(np.argsort(first))
        return Partition(rank[inv])

    def layer(self, net: MultilayerNetwork, layer: int) -> np.ndarray:
        return self.labels[net.layer_slice(layer)]


def as_labels(part) -> np.ndarray:
    if isinstance(part, Partition):
        return part.labels
    return np.asarray(part, dtype=np.int64)


def modularity_terms(net: MultilayerNetwork, part, gamma: float = 1.0):
    """Relabel-invariant pieces of the multilayer modularity sum.

    Returns ``(intra, coupled, total_strength, total_coupling)`` where
    ``intra`` is ``sum_ij (A_ij - gamma P_ij) delta(c_i, c_j)``, ``coupled``
    is ``sum_ij C_ij delta(c_i, c_j)`` (both over ordered pairs, the null
    term including ``i == j``), and the totals are ``sum_i d_i`` and
    ``sum_ij C_ij``.  Every sum is exactly rounded, so the value does not
    depend on how communities are numbered.
    """
    labels = as_labels(part)
    if len(labels) != net.n:
        raise ValueError(f"partition has {len(labels)} labels, network has {net.n} node-layers")
    N, L = net.n_nodes, net.n_layers
    i, j, w = net.intra_edges()
    same = labels[i] == labels[j]
    # edges from triu are sorted by row, hence by layer
    bounds = np.searchsorted(i, np.arange(L + 1) * N)
    k = int(labels.max()) + 1 if len(labels) else 1
    comm_strength = np.bincount(net.layer_of * k + labels, weights=net.strengths,
                                minlength=L * k).reshape(L, k)
    per_layer = []
    for l in range(L):
        lo, hi = bounds[l], bounds[l + 1]
        inside = 2.0 * math.fsum(w[lo:hi][same[lo:hi]])
        m = net.layer_mass[l]
        if m > 0:
            null = math.fsum(comm_strength[l] ** 2) / (2.0 * m)
            per_layer.append(inside - gamma * null)
        else:
            per_layer.append(inside)
    ci, cj, cw = net.inter_edges()
    coupled = 2.0 * math.fsum(cw[labels[ci] == labels[cj]])
    return math.fsum(per_layer), coupled, math.fsum(net.strengths), 2.0 * math.fsum(cw)


def modularity_sum(net: MultilayerNetwork, part, gamma: float = 1.0, omega: float = 1.0) -> float:
    """Unnormalised multilayer modularity ``sum_ij (A - gamma P + omega C)_ij delta``."""
    intra, coupled, _, _ = modularity_terms(net, part, gamma)
    return intra + omega * coupled


def modularity(net: MultilayerNetwork, part, gamma: float = 1.0, omega: float = 1.0) -> float:
    """Multilayer modularity normalised by the total supra strength.

    ``Q = sum_ij (A_ij - gamma d_i d_j / 2m_l [same layer] + omega C_ij) delta(c_i, c_j) / 2mu``
    with ``2mu = sum_i d_i + omega sum_ij C_ij``.
    """
    if gamma < 0 or omega < 0:
        raise ValueError("gamma and omega must be non-negative")
    intra, coupled, strength, coupling = modularity_terms(net, part, gamma)
    two_mu = strength + omega * coupling
    if two_mu <= 0:
        return 0.0
    return (intra + omega * coupled) / two_mu


def _contingency(a, b):
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def _entropy_counts(counts) -> float:
    n = counts.sum()
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def expected_mutual_information(table) -> float:
    """Expected MI of two partitions with fixed cluster sizes under random permutation."""
    a = table.sum(axis=1)
    b = table.sum(axis=0)
    n = int(a.sum())
    emi = 0.0
    lg_n = gammaln(n + 1)
    for ai in a:
        for bj in b:
            lo = max(1, ai + bj - n)
            hi = min(ai, bj)
            if lo > hi:
                continue
            nij = np.arange(lo, hi + 1, dtype=float)
            log_prob = (gammaln(ai + 1) + gammaln(bj + 1) + gammaln(n - ai + 1) + gammaln(n - bj + 1)
                        - lg_n - gammaln(nij + 1) - gammaln(ai - nij + 1) - gammaln(bj - nij + 1)
                        - gammaln(n - ai - bj + nij + 1))
            term = nij / n * np.log(n * nij / (ai * bj))
            emi += float(np.sum(term * np.exp(log_prob)))
    return emi


def ami(a, b) -> float:
    """Adjusted mutual information with max-entropy normalisation (natural log)."""
    a = as_labels(a)
    b = as_labels(b)
    if len(a) == 0:
        raise ValueError("AMI of empty partitions is undefined")
    if len(a) != len(b):
        raise ValueError("partitions must have equal length")
    table = _contingency(a, b)
    nz = table > 0
    # identical up to relabelling, including the all-singletons case where MI = EMI
    if np.all(nz.sum(axis=0) == 1) and np.all(nz.sum(axis=1) == 1):
        return 1.0
    n = table.sum()
    outer = np.outer(table.sum(axis=1), table.sum(axis=0))
    mi = float(np.sum(table[nz] / n * np.log(n * table[nz] / outer[nz])))
    h_a = _entropy_counts(table.sum(axis=1))
    h_b = _entropy_counts(table.sum(axis=0))
    emi = expected_mutual_information(table)
    denom = max(h_a, h_b) - emi
    eps = np.finfo(float).eps
    denom = min(denom, -eps) if denom < 0 else max(denom, eps)
    return (mi - emi) / denom


def layer_averaged_ami(net: MultilayerNetwork, a, b) -> float:
    """Per-layer AMI weighted by the node-layer count of each layer."""
    a = as_labels(a)
    b = as_labels(b)
    if len(a) == 0:
        raise ValueError("AMI of empty partitions is undefined")
    if len(a) != net.n or len(b) != net.n:
        raise ValueError("partitions must cover every node-layer")
    total = 0.0
    for l in range(net.n_layers):
        s = net.layer_slice(l)
        total += ami(a[s], b[s]) * net.n_nodes
    return total / net.n


def marginal_entropy(marg):
    """Shannon entropy (nats) of each marginal row, and their mean."""
    marg = np.asarray(marg, dtype=float)
    if np.any(marg < 0):
        raise ValueError("marginals must be non-negative")
    if not np.allclose(marg.sum(axis=1), 1.0, rtol=0, atol=1e-9):
        raise ValueError("marginal rows must sum to 1")
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(marg > 0, marg * np.log(marg), 0.0)
    per_node = -plogp.sum(axis=1)
    return per_node, float(per_node.mean()) if len(per_node) else 0.0

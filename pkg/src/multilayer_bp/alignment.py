"""Cross-layer relabelling of communities.

Community labels produced independently in each layer carry no shared
meaning, so the same group can appear under different labels in
neighbouring layers.  The routines here permute labels per layer to
maximise agreement across interlayer edges without touching which
node-layers are grouped together inside a layer.
"""
from __future__ import annotations

import numpy as np

from .graph import MultilayerNetwork
from .metrics import Partition, as_labels


def optimal_label_matching(cost) -> np.ndarray:
    """Minimum-cost perfect matching of rows to columns (Hungarian method).

    Returns ``perm`` with ``perm[row] = column``.  Runs in ``O(n^3)`` using
    row/column potentials and shortest augmenting paths.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError("cost matrix must be square")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix must be finite")
    n = cost.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    # 1-based arrays with a virtual column 0 holding the row being inserted
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    match = np.zeros(n + 1, dtype=np.int64)  # match[col] = row
    way = np.zeros(n + 1, dtype=np.int64)
    for row in range(1, n + 1):
        match[0] = row
        col0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[col0] = True
            r = match[col0]
            free = ~used[1:]
            reduced = cost[r - 1] - u[r] - v[1:]
            better = free & (reduced < minv[1:])
            minv[1:][better] = reduced[better]
            way[1:][better] = col0
            cand = np.where(free, minv[1:], np.inf)
            col1 = int(np.argmin(cand)) + 1
            delta = cand[col1 - 1]
            u[match[used]] += delta
            v[used] -= delta
            minv[1:][free] -= delta
            col0 = col1
            if match[col0] == 0:
                break
        while col0:
            prev = way[col0]
            match[col0] = match[prev]
            col0 = prev
    perm = np.empty(n, dtype=np.int64)
    perm[match[1:] - 1] = np.arange(n)
    return perm


def _mismatch_cost(a_labels, b_labels, weights, domain):
    """``cost[s, t]``: coupling weight left unmatched if label ``s`` on side a becomes ``t``.

    Agreement weight under the map ``s -> t`` is ``overlap[s, t]``, so the
    mismatch for a full relabelling is ``total - sum_s overlap[s, perm[s]]``;
    ``row_total - overlap`` gives the same ordering as an assignment cost.
    """
    ai = np.searchsorted(domain, a_labels)
    bi = np.searchsorted(domain, b_labels)
    k = len(domain)
    overlap = np.zeros((k, k))
    np.add.at(overlap, (ai, bi), weights)
    return overlap.sum(axis=1, keepdims=True) - overlap


def _relabel(labels, domain, perm):
    """Apply ``domain[k] -> domain[perm[k]]``; labels outside ``domain`` stay put."""
    pos = np.minimum(np.searchsorted(domain, labels), len(domain) - 1)
    inside = domain[pos] == labels
    out = labels.copy()
    out[inside] = domain[perm[pos[inside]]]
    return out


def _best_relabel(a_labels, b_labels, weights):
    """Optimal relabelling of side a against side b, or ``None`` if identity is optimal."""
    domain = np.union1d(a_labels, b_labels)
    cost = _mismatch_cost(a_labels, b_labels, weights, domain)
    perm = optimal_label_matching(cost)
    ident = np.arange(len(domain))
    gain = np.trace(cost) - cost[ident, perm].sum()
    # integer-valued counts in practice; guard against rounding on weighted couplings
    if gain <= 1e-9 * max(1.0, float(np.sum(weights))):
        return None
    return domain, perm


def _crossing(net, layer_a, layer_b_mask):
    """Interlayer edges with one end in ``layer_a`` and the other in a masked layer.

    Returned as ``(end in layer_a, other end, weight)``.
    """
    i, j, w = net.inter_edges()
    li, lj = net.layer_of[i], net.layer_of[j]
    fwd = (li == layer_a) & layer_b_mask[lj]
    bwd = (lj == layer_a) & layer_b_mask[li]
    return (np.concatenate([i[fwd], j[bwd]]), np.concatenate([j[fwd], i[bwd]]),
            np.concatenate([w[fwd], w[bwd]]))


def _cut_edges(net, x):
    """Interlayer edges joining layers ``>= x`` to layers ``< x``; ends ordered (late, early)."""
    i, j, w = net.inter_edges()
    li, lj = net.layer_of[i], net.layer_of[j]
    fwd = (li >= x) & (lj < x)
    bwd = (lj >= x) & (li < x)
    return (np.concatenate([i[fwd], j[bwd]]), np.concatenate([j[fwd], i[bwd]]),
            np.concatenate([w[fwd], w[bwd]]))


def align_temporal(net: MultilayerNetwork, part) -> Partition:
    """Repeatedly repair the layer whose labels change most from the previous one.

    The worst layer ``x`` (most mismatched coupling weight towards earlier
    layers; ties go to the lowest index) is matched against them, and the
    resulting permutation is applied to ``x`` and every later layer.  Stops
    once the best matching at the worst layer is the identity.  With adjacent-layer coupling the matching cost is the
    mismatch count between ``x`` and ``x - 1``; for other couplings every
    edge crossing the cut in front of ``x`` is counted, which keeps the
    coupling agreement, and hence modularity, from ever dropping.
    """
    labels = as_labels(part).copy()
    if len(labels) != net.n:
        raise ValueError("partition must label every node-layer")
    L, N = net.n_layers, net.n_nodes
    cuts = [_cut_edges(net, x) for x in range(L)]
    while L > 1:
        mismatches = np.array([0.0] + [np.sum(w[labels[a] != labels[b]])
                                       for a, b, w in cuts[1:]])
        x = int(np.argmax(mismatches))
        if mismatches[x] <= 0:
            break
        a, b, w = cuts[x]
        found = _best_relabel(labels[a], labels[b], w)
        if found is None:
            break
        domain, perm = found
        tail = slice(x * N, net.n)
        labels[tail] = _relabel(labels[tail], domain, perm)
    return Partition(labels)


def align_multiplex(net: MultilayerNetwork, part, seed=None) -> Partition:
    """Relabel each layer against all layers coupled to it, in random order.

    A full pass over the layers that changes nothing ends the procedure.
    Each applied permutation strictly raises the coupling agreement, so the
    loop terminates.
    """
    labels = as_labels(part).copy()
    if len(labels) != net.n:
        raise ValueError("partition must label every node-layer")
    L, N = net.n_layers, net.n_nodes
    rng = np.random.default_rng(seed)
    others = []
    for x in range(L):
        mask = np.ones(L, dtype=bool)
        mask[x] = False
        others.append(_crossing(net, x, mask))
    changed = L > 1
    while changed:
        changed = False
        for x in rng.permutation(L):
            a, b, w = others[x]
            if len(w) == 0:
                continue
            found = _best_relabel(labels[a], labels[b], w)
            if found is None:
                continue
            domain, perm = found
            block = slice(x * N, (x + 1) * N)
            labels[block] = _relabel(labels[block], domain, perm)
            changed = True
    return Partition(labels)


def align(net: MultilayerNetwork, part, mode: str = "auto", seed=None) -> Partition:
    """Dispatch on ``mode``: ``auto`` picks by coupling kind, ``off`` returns the input."""
    if mode == "auto":
        mode = {"temporal": "temporal", "multiplex": "multiplex"}.get(net.coupling_kind(), "off")
    if mode == "temporal":
        return align_temporal(net, part)
    if mode == "multiplex":
        return align_multiplex(net, part, seed)
    if mode == "off":
        return part if isinstance(part, Partition) else Partition(part)
    raise ValueError(f"unknown alignment mode {mode!r}")

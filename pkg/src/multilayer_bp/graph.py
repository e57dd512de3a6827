"""Multilayer networks in supra form.

Node-layer ``i`` is node ``i % N`` in layer ``i // N``; every node has a
node-layer in every layer, and nodes missing from a layer simply stay
isolated there.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

COUPLING_PRESETS = ("temporal", "multiplex", "none")


class NetworkError(ValueError):
    """Raised for malformed network input."""


@dataclass(frozen=True, eq=False)
class MultilayerNetwork:
    n_nodes: int
    n_layers: int
    intra_adj: sp.csr_matrix
    inter_coup: sp.csr_matrix
    layer_of: np.ndarray = field(init=False)
    node_of: np.ndarray = field(init=False)
    strengths: np.ndarray = field(init=False)
    layer_mass: np.ndarray = field(init=False)

    def __post_init__(self):
        n = self.n_nodes * self.n_layers
        idx = np.arange(n)
        layer_of = idx // self.n_nodes
        node_of = idx % self.n_nodes
        strengths = np.asarray(self.intra_adj.sum(axis=1)).ravel()
        layer_mass = np.bincount(layer_of, weights=strengths, minlength=self.n_layers) / 2.0
        for name, arr in (("layer_of", layer_of), ("node_of", node_of),
                          ("strengths", strengths), ("layer_mass", layer_mass)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        """Total number of node-layers."""
        return self.n_nodes * self.n_layers

    def layer_slice(self, layer: int) -> slice:
        return slice(layer * self.n_nodes, (layer + 1) * self.n_nodes)

    def intra_edges(self):
        """Undirected intralayer edges as arrays ``(i, j, w)`` with ``i < j``."""
        upper = sp.triu(self.intra_adj, k=1).tocoo()
        return upper.row.astype(np.int64), upper.col.astype(np.int64), upper.data.astype(float)

    def inter_edges(self):
        """Undirected interlayer edges as arrays ``(i, j, c)`` with ``i < j``."""
        upper = sp.triu(self.inter_coup, k=1).tocoo()
        return upper.row.astype(np.int64), upper.col.astype(np.int64), upper.data.astype(float)

    def supra_weights(self, omega: float) -> sp.csr_matrix:
        """The combined weight matrix: intralayer ``A`` plus ``omega * C``.

        Entries vanish where ``omega == 0``, so the result only holds edges
        that actually carry messages.
        """
        if omega == 0:
            return self.intra_adj.copy()
        out = (self.intra_adj + omega * self.inter_coup).tocsr()
        out.eliminate_zeros()
        return out

    def coupling_kind(self) -> str:
        """Classify the interlayer topology as ``none``, ``temporal`` or ``multiplex``."""
        i, j, _ = self.inter_edges()
        if len(i) == 0:
            return "none"
        gaps = np.abs(self.layer_of[i] - self.layer_of[j])
        return "temporal" if np.all(gaps == 1) else "multiplex"

    def layer_network(self, layer: int) -> "MultilayerNetwork":
        """Single-layer network holding only the edges of ``layer``."""
        s = self.layer_slice(layer)
        adj = self.intra_adj[s, :][:, s].tocsr()
        return MultilayerNetwork(self.n_nodes, 1, adj, sp.csr_matrix((self.n_nodes, self.n_nodes)))

    def same_as(self, other: "MultilayerNetwork") -> bool:
        if (self.n_nodes, self.n_layers) != (other.n_nodes, other.n_layers):
            return False
        return ((self.intra_adj != other.intra_adj).nnz == 0
                and (self.inter_coup != other.inter_coup).nnz == 0)


def _symmetric(rows, cols, vals, n) -> sp.csr_matrix:
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=float)
    r = np.concatenate([rows, cols])
    c = np.concatenate([cols, rows])
    v = np.concatenate([vals, vals])
    # canonical entry order so duplicate sums do not depend on input order
    order = np.lexsort((v, c, r))
    r, c, v = r[order], c[order], v[order]
    mat = sp.coo_matrix((v, (r, c)), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def preset_coupling(preset: str, n_nodes: int, n_layers: int):
    """Interlayer edge rows ``(node, layer_a, layer_b, weight)`` for a named topology."""
    if preset not in COUPLING_PRESETS:
        raise NetworkError(f"unknown coupling preset {preset!r}")
    if preset == "none" or n_layers < 2:
        return []
    if preset == "temporal":
        pairs = [(a, a + 1) for a in range(n_layers - 1)]
    else:
        pairs = [(a, b) for a in range(n_layers) for b in range(a + 1, n_layers)]
    nodes = np.arange(n_nodes)
    return np.vstack([np.column_stack([nodes, np.full(n_nodes, a), np.full(n_nodes, b),
                                       np.ones(n_nodes)]) for a, b in pairs])


def build_network(
    intra_edges: Iterable[Sequence],
    inter_edges: Iterable[Sequence] | str = "none",
    n_nodes: int | None = None,
    n_layers: int | None = None,
) -> MultilayerNetwork:
    """Validate edge lists and assemble a :class:`MultilayerNetwork`.

    ``intra_edges`` holds ``(layer, u, v[, weight])`` tuples and
    ``inter_edges`` either ``(node, layer_a, layer_b[, weight])`` tuples or
    one of the preset names ``temporal``, ``multiplex``, ``none``.  Repeated
    edges have their weights summed.
    """
    intra = _as_rows(intra_edges, 3)
    preset = inter_edges if isinstance(inter_edges, str) else None
    inter = None if preset is not None else _as_rows(inter_edges, 3)

    if n_nodes is None:
        cand = [intra[:, 1:3].max() + 1 if len(intra) else 0]
        if inter is not None and len(inter):
            cand.append(inter[:, 0].max() + 1)
        n_nodes = int(max(cand))
    if n_layers is None:
        cand = [intra[:, 0].max() + 1 if len(intra) else 1]
        if inter is not None and len(inter):
            cand.append(inter[:, 1:3].max() + 1)
        n_layers = int(max(cand))
    if n_nodes < 1 or n_layers < 1:
        raise NetworkError("network needs at least one node and one layer")
    if preset is not None:
        inter = _as_rows(preset_coupling(preset, n_nodes, n_layers), 3)

    n = n_nodes * n_layers
    layer, u, v = (intra[:, k].astype(np.int64) for k in range(3))
    w = intra[:, 3]
    _check_range(layer, n_layers, "layer")
    _check_range(u, n_nodes, "node")
    _check_range(v, n_nodes, "node")
    if np.any(u == v):
        raise NetworkError("self-loops are not allowed")
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise NetworkError("edge weights must be positive and finite")
    adj = _symmetric(u + n_nodes * layer, v + n_nodes * layer, w, n)

    node, la, lb = (inter[:, k].astype(np.int64) for k in range(3))
    cw = inter[:, 3]
    _check_range(node, n_nodes, "node")
    _check_range(la, n_layers, "layer")
    _check_range(lb, n_layers, "layer")
    if np.any(la == lb):
        raise NetworkError("interlayer edge must join two different layers")
    if np.any(cw <= 0) or not np.all(np.isfinite(cw)):
        raise NetworkError("coupling weights must be positive and finite")
    coup = _symmetric(node + n_nodes * la, node + n_nodes * lb, cw, n)
    return MultilayerNetwork(n_nodes, n_layers, adj, coup)


def _as_rows(edges, min_cols: int) -> np.ndarray:
    if isinstance(edges, np.ndarray) and edges.ndim == 2 and edges.shape[1] in (min_cols, min_cols + 1):
        out = np.asarray(edges, dtype=float)
        if out.shape[1] == min_cols:
            out = np.column_stack([out, np.ones(len(out))])
        if np.any(out[:, :min_cols] != np.round(out[:, :min_cols])):
            raise NetworkError("node and layer indices must be integers")
        return out
    rows = [tuple(e) for e in edges]
    if not rows:
        return np.zeros((0, min_cols + 1))
    out = np.empty((len(rows), min_cols + 1))
    for k, r in enumerate(rows):
        if len(r) == min_cols:
            r = (*r, 1.0)
        elif len(r) != min_cols + 1:
            raise NetworkError(f"edge entry {r!r} has the wrong arity")
        out[k] = r
    if np.any(out[:, :min_cols] != np.round(out[:, :min_cols])):
        raise NetworkError("node and layer indices must be integers")
    return out


def _check_range(arr, bound, what):
    if len(arr) and (arr.min() < 0 or arr.max() >= bound):
        raise NetworkError(f"{what} index out of range [0, {bound})")


def excess_degree(net: MultilayerNetwork) -> float:
    """Average excess degree ``<d^2>/<d> - 1`` over all node-layers.

    Strengths count intralayer edges only; isolated placeholder node-layers
    are included in both averages.
    """
    d = net.strengths
    c = d.mean()
    if c <= 0:
        raise NetworkError("excess degree undefined for a network without edges")
    return float(np.mean(d * d) / c - 1.0)

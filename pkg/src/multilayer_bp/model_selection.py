"""Merging of communities whose marginal columns are nearly identical."""
from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

DEFAULT_THRESHOLD = 0.02


def column_distances(marg: np.ndarray) -> np.ndarray:
    """Mean absolute difference between every pair of community columns."""
    marg = np.asarray(marg, dtype=float)
    return np.abs(marg[:, :, None] - marg[:, None, :]).mean(axis=0)


def _merge_once(marg, threshold):
    close = column_distances(marg) < threshold
    n_groups, group = connected_components(csr_matrix(close), directed=False)
    if n_groups == marg.shape[1]:
        return np.arange(n_groups), marg
    # number groups by their lowest column so the relabelling is stable
    first = np.full(n_groups, marg.shape[1])
    np.minimum.at(first, group, np.arange(marg.shape[1]))
    rank = np.argsort(np.argsort(first))
    mapping = rank[group]
    reduced = np.zeros((marg.shape[0], n_groups))
    np.add.at(reduced.T, mapping, marg.T)
    return mapping, reduced / reduced.sum(axis=1, keepdims=True)


def collapse_communities(marg, threshold: float = DEFAULT_THRESHOLD):
    """Single-linkage merge of columns closer than ``threshold``.

    Merged columns are summed.  Merging repeats until no pair of the
    reduced columns is closer than ``threshold``, so a second call is a
    no-op.  Returns ``(mapping, reduced)`` with ``mapping[old] = new``.
    """
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    marg = np.asarray(marg, dtype=float)
    if marg.ndim != 2 or marg.shape[1] == 0:
        raise ValueError("marginals must be a non-empty (n, q) array")
    mapping = np.arange(marg.shape[1])
    while True:
        step, reduced = _merge_once(marg, threshold)
        mapping = step[mapping]
        if reduced.shape[1] == marg.shape[1]:
            return mapping, reduced
        marg = reduced

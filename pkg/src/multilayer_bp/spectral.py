"""Spectral starting partitions from the supra-modularity matrix.

``B = A - gamma P + omega C`` with ``P`` block-diagonal and rank one per
layer, ``P_l = d_l d_l^T / 2 m_l``.  ``B`` is only ever applied to vectors so
the dense null-model blocks are never formed.
"""
from __future__ import annotations

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh
from sklearn.cluster import KMeans

from .graph import MultilayerNetwork
from .metrics import Partition

DENSE_LIMIT = 400


class EigenSolverError(RuntimeError):
    pass


def supra_modularity_matrix(net: MultilayerNetwork, gamma: float = 1.0,
                            omega: float = 1.0) -> LinearOperator:
    """Matrix-free symmetric operator ``x -> A x - gamma P x + omega C x``."""
    if gamma < 0 or omega < 0:
        raise ValueError("gamma and omega must be non-negative")
    weights = net.supra_weights(omega)
    L, N = net.n_layers, net.n_nodes
    d = net.strengths.reshape(L, N)
    mass = net.layer_mass
    scale = np.zeros(L)
    scale[mass > 0] = gamma / (2.0 * mass[mass > 0])

    def matvec(x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(net.n, -1)
        blocks = flat.reshape(L, N, -1)
        # per layer: d_l (d_l . x_l) / 2 m_l
        proj = np.einsum("ln,lnk->lk", d, blocks) * scale[:, None]
        null = (d[:, :, None] * proj[:, None, :]).reshape(net.n, -1)
        out = weights @ flat - null
        return out.reshape(x.shape)

    return LinearOperator((net.n, net.n), matvec=matvec, matmat=matvec,
                          rmatvec=matvec, dtype=float)


def dense_supra_modularity(net: MultilayerNetwork, gamma: float = 1.0,
                           omega: float = 1.0) -> np.ndarray:
    """Materialised ``B``; only sensible for small networks."""
    return supra_modularity_matrix(net, gamma, omega).matmat(np.eye(net.n))


def leading_eigenpairs(net: MultilayerNetwork, gamma: float, omega: float, k: int,
                       seed=None):
    """The ``k`` algebraically largest eigenpairs of ``B``, values non-increasing."""
    if not 1 <= k < net.n:
        raise ValueError(f"need 1 <= k < {net.n}, got k={k}")
    op = supra_modularity_matrix(net, gamma, omega)
    if net.n <= DENSE_LIMIT or k >= net.n - 1:
        vals, vecs = np.linalg.eigh(op.matmat(np.eye(net.n)))
        vals, vecs = vals[-k:], vecs[:, -k:]
    else:
        v0 = np.random.default_rng(seed).uniform(-1, 1, net.n)
        try:
            vals, vecs = eigsh(op, k=k, which="LA", v0=v0, maxiter=20 * net.n, tol=1e-10)
        except ArpackNoConvergence as exc:
            raise EigenSolverError(
                f"eigensolver converged {len(exc.eigenvalues)} of {k} eigenpairs "
                f"after {20 * net.n} iterations") from exc
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


def spectral_partition(net: MultilayerNetwork, gamma: float, omega: float, q_max: int,
                       seed=None) -> Partition:
    """K-means (``q_max`` clusters) on the leading ``q_max - 1`` eigenvectors of ``B``."""
    if q_max < 2:
        raise ValueError("q_max must be at least 2")
    k = min(q_max - 1, net.n - 1)
    _, vecs = leading_eigenpairs(net, gamma, omega, k, seed)
    km = KMeans(n_clusters=min(q_max, net.n), init="k-means++", n_init=10,
                random_state=seed)
    return Partition(km.fit_predict(vecs)).canonical()

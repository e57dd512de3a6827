"""Inverse temperature at which the factorized BP fixed point loses stability.

For a population of edge weights ``w`` and excess degree ``c_hat`` the
threshold solves

    c_hat * mean_w[ ((exp(beta w) - 1) / (exp(beta w) + q - 1))**2 ] = 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import MultilayerNetwork, excess_degree

MAX_ITERS = 200


class NoThresholdError(ValueError):
    """The factorized solution never destabilises (``c_hat <= 1``)."""


@dataclass(frozen=True)
class StabilitySpec:
    q: int
    weights: np.ndarray
    c_hat: float
    omega: float = 1.0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.size == 0:
            raise ValueError("weight population is empty")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        if self.q < 2:
            raise ValueError("q must be at least 2")
        object.__setattr__(self, "weights", w)


def _eta(x, q):
    # (e^x - 1)/(e^x + q - 1) written in e^-x to stay finite for large x
    e = np.exp(-x)
    return (1.0 - e) / (1.0 + (q - 1) * e)


def _deta(x, q):
    e = np.exp(-x)
    return q * e / (1.0 + (q - 1) * e) ** 2


def stability_residual(beta: float, spec: StabilitySpec) -> float:
    eta = _eta(beta * spec.weights, spec.q)
    return float(spec.c_hat * np.mean(eta * eta) - 1.0)


def closed_form_beta(q: int, c_hat: float, weight: float = 1.0) -> float:
    """Exact threshold for a single shared edge weight."""
    if c_hat <= 1:
        raise NoThresholdError(f"c_hat={c_hat} <= 1 has no finite threshold")
    return math.log1p(q / (math.sqrt(c_hat) - 1.0)) / weight


def solve_beta_star(spec: StabilitySpec, tol: float = 1e-12) -> float:
    """Newton iteration on the stability residual, falling back to bisection."""
    if spec.c_hat <= 1:
        raise NoThresholdError(f"c_hat={spec.c_hat} <= 1 has no finite threshold")
    w = spec.weights
    q = spec.q

    def f(b):
        return stability_residual(b, spec)

    def fprime(b):
        x = b * w
        return float(spec.c_hat * np.mean(2.0 * _eta(x, q) * _deta(x, q) * w))

    # residual rises monotonically from -1 at beta=0 to c_hat-1 > 0
    lo, hi = 0.0, closed_form_beta(q, spec.c_hat, float(w.min()))
    while f(hi) < 0:
        lo, hi = hi, 2.0 * hi
    beta = closed_form_beta(q, spec.c_hat, float(w.mean()))
    if not lo < beta < hi:
        beta = 0.5 * (lo + hi)
    for _ in range(MAX_ITERS):
        r = f(beta)
        if abs(r) < tol:
            return beta
        if r < 0:
            lo = beta
        else:
            hi = beta
        d = fprime(beta)
        step = beta - r / d if d > 0 else np.nan
        if not lo < step < hi:
            step = 0.5 * (lo + hi)
        if step == beta or hi - lo < 1e-15 * max(1.0, hi):
            return step
        beta = step
    raise RuntimeError(f"beta* solver did not converge in {MAX_ITERS} iterations "
                       f"(q={q}, c_hat={spec.c_hat}, residual={f(beta):.3e})")


def weight_population(net: MultilayerNetwork, omega: float) -> np.ndarray:
    """Nonzero supra-edge weights, each undirected edge once; coupling scaled by ``omega``."""
    _, _, w = net.intra_edges()
    if omega > 0:
        _, _, c = net.inter_edges()
        w = np.concatenate([w, omega * c])
    return w


def beta_grid(net: MultilayerNetwork, omega: float, q_max: int, tol: float = 1e-12) -> list[float]:
    """Thresholds ``[beta*(q=2), ..., beta*(q=q_max)]`` for the network.

    The resolution parameter plays no part in the threshold.
    """
    if q_max < 2:
        raise ValueError("q_max must be at least 2")
    weights = weight_population(net, omega)
    c_hat = excess_degree(net)
    return [solve_beta_star(StabilitySpec(q, weights, c_hat, omega), tol) for q in range(2, q_max + 1)]

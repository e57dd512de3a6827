"""Compiled inner loops for the message-passing sweep."""
import math

import numpy as np
from numba import njit

BIG_EXPONENT = 30.0


@njit(cache=True)
def edge_logterm(a, em1, p):
    """log(1 + p (e^a - 1)), finite for any a >= 0 and p in [0, 1]."""
    if p <= 0.0:
        return 0.0
    if a < BIG_EXPONENT:
        return math.log1p(p * em1)
    return a + math.log(p + math.exp(-a) * (1.0 - p))


@njit(cache=True)
def sweep_kernel(order, ptr, dst, rev, a, em1, msg_in, msg_out, marg,
                 coef, layer_of, theta, damping, scratch, strengths, incremental):
    """Update every message leaving the node-layers listed in ``order``.

    Incoming messages are read from ``msg_in`` and outgoing ones written to
    ``msg_out``; pass the same array twice for in-place (asynchronous)
    updates.  ``marg`` is refreshed for each visited node; with
    ``incremental`` the layer field ``theta`` follows each marginal change
    immediately instead of waiting for the end of the pass.  Returns the
    largest absolute change of any message entry and the id of the first
    directed edge whose update was not finite (-1 if none).
    """
    q = msg_in.shape[1]
    total = np.empty(q)
    out = np.empty(q)
    max_change = 0.0
    for idx in range(order.shape[0]):
        i = order[idx]
        lo = ptr[i]
        hi = ptr[i + 1]
        layer = layer_of[i]
        for t in range(q):
            total[t] = -coef[i] * theta[layer, t]
        for e in range(lo, hi):
            r = rev[e]
            for t in range(q):
                v = edge_logterm(a[e], em1[e], msg_in[r, t])
                scratch[e - lo, t] = v
                total[t] += v
        # marginal: no excluded neighbour
        mx = total[0]
        for t in range(1, q):
            if total[t] > mx:
                mx = total[t]
        if not math.isfinite(mx):
            return max_change, lo if hi > lo else -2 - i
        z = 0.0
        for t in range(q):
            out[t] = math.exp(total[t] - mx)
            z += out[t]
        for t in range(q):
            new = out[t] / z
            if incremental:
                theta[layer, t] += strengths[i] * (new - marg[i, t])
            marg[i, t] = new
        for e in range(lo, hi):
            mx = total[0] - scratch[e - lo, 0]
            for t in range(1, q):
                v = total[t] - scratch[e - lo, t]
                if v > mx:
                    mx = v
            if not math.isfinite(mx):
                return max_change, e
            z = 0.0
            for t in range(q):
                out[t] = math.exp(total[t] - scratch[e - lo, t] - mx)
                z += out[t]
            for t in range(q):
                new = out[t] / z
                old = msg_in[e, t]
                if damping > 0.0:
                    new = (1.0 - damping) * new + damping * old
                d = abs(new - old)
                if d > max_change:
                    max_change = d
                msg_out[e, t] = new
    return max_change, -1


@njit(cache=True)
def incoming_totals(ptr, rev, a, em1, msg, coef, layer_of, theta):
    """Unnormalised log-marginals ``field + sum over all incoming log terms``."""
    n = ptr.shape[0] - 1
    q = msg.shape[1]
    out = np.empty((n, q))
    for i in range(n):
        layer = layer_of[i]
        for t in range(q):
            out[i, t] = -coef[i] * theta[layer, t]
        for e in range(ptr[i], ptr[i + 1]):
            r = rev[e]
            for t in range(q):
                out[i, t] += edge_logterm(a[e], em1[e], msg[r, t])
    return out

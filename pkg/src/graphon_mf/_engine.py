"""Compiled inner loop of the event-driven simulator.

Layout shared with :mod:`graphon_mf.dynamics`:

* ``tree`` is a binary sum tree of length ``2 * cap``; leaf ``cap + i`` holds
  the total outgoing rate of vertex ``i`` and node ``k`` holds
  ``tree[2k] + tree[2k + 1]``. Padding leaves are zero.
* ``counts[i, s]`` is the number of neighbours of ``i`` in state ``s``; the
  environment vector is ``counts[i] * scale`` with ``scale = 1 / (N kappa)``.
* ``base[f, t]`` and ``inter[f, t, r]`` give the rate ``f -> t`` as
  ``base[f, t] + sum_r inter[f, t, r] * phi_r``.
"""
import math

import numpy as np
from numba import njit

REACHED = 0
ABSORBED = 1
NEED_RANDOMS = 2
EVENT_LIMIT = 3


@njit(cache=True)
def vertex_rate(s, counts_row, base, inter, scale):
    S = base.shape[0]
    total = 0.0
    for t in range(S):
        if t == s:
            continue
        r = base[s, t]
        for v in range(S):
            r += inter[s, t, v] * counts_row[v] * scale
        total += r
    return total


@njit(cache=True)
def build_tree(rates, cap):
    tree = np.zeros(2 * cap)
    tree[cap : cap + rates.size] = rates
    for k in range(cap - 1, 0, -1):
        tree[k] = tree[2 * k] + tree[2 * k + 1]
    return tree


@njit(cache=True)
def refresh(tree, nodes, count, mark, stamp):
    """Recompute every ancestor of the ``count`` leaves listed in ``nodes``.

    All leaves sit at the same depth, so the dirty set is processed level by
    level and each ancestor is recomputed once.
    """
    while count > 0 and nodes[0] > 1:
        stamp[0] += 1
        st = stamp[0]
        new = 0
        for q in range(count):
            p = nodes[q] >> 1
            if mark[p] != st:
                mark[p] = st
                tree[p] = tree[2 * p] + tree[2 * p + 1]
                nodes[new] = p
                new += 1
        count = new


@njit(cache=True)
def select_leaf(tree, cap, r):
    k = 1
    while k < cap:
        left = tree[2 * k]
        if r < left or tree[2 * k + 1] <= 0.0:
            k = 2 * k
        else:
            r -= left
            k = 2 * k + 1
    return k - cap


@njit(cache=True)
def advance(state, counts, rates, tree, cap, indptr, indices, base, inter, scale,
            clock, t_stop, max_events, u, upos, nodes, mark, stamp, last):
    """Run events until ``t_stop``, absorption, ``max_events`` or the uniform
    buffer runs dry. Returns ``(status, events)``.

    ``clock[0]`` is the simulation time and ``upos[0]`` the read position in
    ``u``. ``last`` receives (vertex, from, to) of the latest event. When the
    next event would land past ``t_stop`` the clock stops at ``t_stop`` and
    the pending draw is discarded, which is exact by memorylessness.
    """
    S = base.shape[0]
    events = 0
    while events < max_events:
        total = tree[1]
        if total <= 0.0:
            if t_stop < np.inf:
                clock[0] = t_stop
            return ABSORBED, events
        p = upos[0]
        if p + 3 > u.size:
            return NEED_RANDOMS, events
        tau = -math.log1p(-u[p]) / total
        if clock[0] + tau > t_stop:
            clock[0] = t_stop
            upos[0] = p + 1
            return REACHED, events
        clock[0] += tau
        v = select_leaf(tree, cap, u[p + 1] * total)
        if rates[v] <= 0.0:
            # rounding pushed the search onto an empty leaf; walk to a live one
            w = v
            while w > 0 and rates[w] <= 0.0:
                w -= 1
            if rates[w] <= 0.0:
                w = v
                while w < rates.size - 1 and rates[w] <= 0.0:
                    w += 1
            v = w
        old = state[v]
        r = u[p + 2] * rates[v]
        new = -1
        acc = 0.0
        for t in range(S):
            if t == old:
                continue
            q = base[old, t]
            for s in range(S):
                q += inter[old, t, s] * counts[v, s] * scale
            if q <= 0.0:
                continue
            new = t
            acc += q
            if r < acc:
                break
        upos[0] = p + 3
        state[v] = new
        n_dirty = 0
        for e in range(indptr[v], indptr[v + 1]):
            j = indices[e]
            counts[j, old] -= 1
            counts[j, new] += 1
            rj = vertex_rate(state[j], counts[j], base, inter, scale)
            rates[j] = rj
            tree[cap + j] = rj
            nodes[n_dirty] = cap + j
            n_dirty += 1
        rv = vertex_rate(new, counts[v], base, inter, scale)
        rates[v] = rv
        tree[cap + v] = rv
        nodes[n_dirty] = cap + v
        n_dirty += 1
        refresh(tree, nodes, n_dirty, mark, stamp)
        last[0] = v
        last[1] = old
        last[2] = new
        events += 1
    return EVENT_LIMIT, events


@njit(cache=True)
def _field(v, A, G0, G1, out):
    M, S = v.shape
    phi = A @ v
    for k in range(M):
        for t in range(S):
            acc = 0.0
            for f in range(S):
                acc += v[k, f] * G0[f, t]
            for r in range(S):
                p = phi[k, r]
                if p == 0.0:
                    continue
                for f in range(S):
                    acc += p * v[k, f] * G1[r * S + f, t]
            out[k, t] = acc


@njit(cache=True)
def rk4(v, A, G0, G1, h, n_steps):
    """Advance ``v`` in place by ``n_steps`` classical Runge-Kutta steps of
    ``dv_t = sum_f v_f G0[f, t] + sum_{r, f} (A v)_r v_f G1[r S + f, t]``."""
    k1 = np.empty_like(v)
    k2 = np.empty_like(v)
    k3 = np.empty_like(v)
    k4 = np.empty_like(v)
    for _ in range(n_steps):
        _field(v, A, G0, G1, k1)
        _field(v + 0.5 * h * k1, A, G0, G1, k2)
        _field(v + 0.5 * h * k2, A, G0, G1, k3)
        _field(v + h * k3, A, G0, G1, k4)
        v += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

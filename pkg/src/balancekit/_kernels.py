"""Compiled inner loops for long balancing runs.

State is the vertex potential ``p``; the current weight of edge ``e`` is
``w0[e] + p[dst[e]] - p[src[e]]``, so the weights are never stored and a run
is fully described by the sequence of increments to ``p``.
"""
import numpy as np
from numba import njit

BALANCE = 0
RAISE = 1
LOWER = 2
ALL_MATCH = -1


@njit(cache=True)
def _maxes(v, p, w0, src, dst, out_ptr, out_e, in_ptr, in_e):
    out_m = -np.inf
    for k in range(out_ptr[v], out_ptr[v + 1]):
        e = out_e[k]
        x = w0[e] + p[dst[e]] - p[src[e]]
        if x > out_m:
            out_m = x
    in_m = -np.inf
    for k in range(in_ptr[v], in_ptr[v + 1]):
        e = in_e[k]
        x = w0[e] + p[dst[e]] - p[src[e]]
        if x > in_m:
            in_m = x
    return out_m, in_m


@njit(cache=True)
def _increment(mode, out_m, in_m):
    d = out_m - in_m
    if mode == RAISE and d <= 0.0:
        return 0.0
    if mode == LOWER and d >= 0.0:
        return 0.0
    return 0.5 * d


@njit(cache=True)
def _side_imbalance(mode, out_m, in_m):
    d = out_m - in_m
    if mode == RAISE:
        return d if d > 0.0 else 0.0
    if mode == LOWER:
        return -d if d < 0.0 else 0.0
    return d if d > 0.0 else -d


@njit(cache=True)
def phase_imbalance(mode, p, w0, src, dst, out_ptr, out_e, in_ptr, in_e):
    n = p.size
    worst = 0.0
    for v in range(n):
        out_m, in_m = _maxes(v, p, w0, src, dst, out_ptr, out_e, in_ptr, in_e)
        r = _side_imbalance(mode, out_m, in_m)
        if r > worst:
            worst = r
    return worst


@njit(cache=True)
def _greedy_vertex(mode, p, w0, src, dst, out_ptr, out_e, in_ptr, in_e):
    best = 0
    worst = -1.0
    for v in range(p.size):
        out_m, in_m = _maxes(v, p, w0, src, dst, out_ptr, out_e, in_ptr, in_e)
        r = _side_imbalance(mode, out_m, in_m)
        if r > worst:
            worst = r
            best = v
    return best


@njit(cache=True)
def _opposite_sum_check(mode, v, p, w0, src, dst, out_ptr, out_e, in_ptr, in_e, buf):
    # opposite-side imbalance at v and its neighbours, written into buf
    other = LOWER if mode == RAISE else RAISE
    cnt = 0
    out_m, in_m = _maxes(v, p, w0, src, dst, out_ptr, out_e, in_ptr, in_e)
    buf[cnt] = _side_imbalance(other, out_m, in_m)
    cnt += 1
    for k in range(out_ptr[v], out_ptr[v + 1]):
        u = dst[out_e[k]]
        out_m, in_m = _maxes(u, p, w0, src, dst, out_ptr, out_e, in_ptr, in_e)
        buf[cnt] = _side_imbalance(other, out_m, in_m)
        cnt += 1
    for k in range(in_ptr[v], in_ptr[v + 1]):
        u = src[in_e[k]]
        out_m, in_m = _maxes(u, p, w0, src, dst, out_ptr, out_e, in_ptr, in_e)
        buf[cnt] = _side_imbalance(other, out_m, in_m)
        cnt += 1
    return cnt


@njit(cache=True)
def run_block(mode, choices, t0, check_every, eps, early_exit, record, audit, audit_tol,
              p, w0, src, dst, out_ptr, out_e, in_ptr, in_e, rec_v, rec_amt):
    """Run up to ``choices.size`` operations.

    A choice of -1 picks the vertex with the largest relevant imbalance.
    Returns ``(ops_done, reached, nontrivial, violations)``.
    """
    nontrivial = 0
    violations = 0
    deg = np.diff(out_ptr) + np.diff(in_ptr)
    before = np.empty(deg.max() + 1)
    after = np.empty(deg.max() + 1)
    for i in range(choices.size):
        if early_exit and (t0 + i) % check_every == 0:
            if phase_imbalance(mode, p, w0, src, dst, out_ptr, out_e, in_ptr, in_e) <= eps:
                return i, True, nontrivial, violations
        v = choices[i]
        if v < 0:
            v = _greedy_vertex(mode, p, w0, src, dst, out_ptr, out_e, in_ptr, in_e)
        out_m, in_m = _maxes(v, p, w0, src, dst, out_ptr, out_e, in_ptr, in_e)
        d = _increment(mode, out_m, in_m)
        if d != 0.0:
            nontrivial += 1
            if audit and mode != BALANCE:
                cnt = _opposite_sum_check(mode, v, p, w0, src, dst, out_ptr, out_e, in_ptr, in_e, before)
                p[v] += d
                _opposite_sum_check(mode, v, p, w0, src, dst, out_ptr, out_e, in_ptr, in_e, after)
                for k in range(cnt):
                    if after[k] > before[k] + audit_tol:
                        violations += 1
            else:
                p[v] += d
        if record:
            rec_v[i] = v
            rec_amt[i] = d
    return choices.size, False, nontrivial, violations


@njit(cache=True)
def replay_block(modes, verts, amounts, p, w0, src, dst, out_ptr, out_e, in_ptr, in_e):
    """Re-derive every recorded increment and apply it.

    Returns the index of the first step whose recomputed increment differs
    bit-wise from the record, or -1 if all match.
    """
    for i in range(verts.size):
        v = verts[i]
        out_m, in_m = _maxes(v, p, w0, src, dst, out_ptr, out_e, in_ptr, in_e)
        d = _increment(modes[i], out_m, in_m)
        if d != amounts[i]:
            return i
        p[v] += d
    return ALL_MATCH

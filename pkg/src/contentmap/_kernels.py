# Compiled inner loops for single-node moves.  All module aggregates live in
# flat arrays indexed by module slot; see codelength.CodelengthState.
import math

import numpy as np
from numba import njit

INV_LN2 = 1.0 / math.log(2.0)


@njit(cache=True, inline="always")
def plogp(x):
    if x > 0.0:
        return x * math.log(x) * INV_LN2
    return 0.0


@njit(cache=True, inline="always")
def exit_rate(F, D, p, nm, n, tau, directed):
    if not directed:
        return F
    tele = 0.0
    if n > 1:
        tele = tau * (n - nm) / (n - 1.0) * p
    return tele + (1.0 - tau) * (F + D * (n - nm) / n)


@njit(cache=True, inline="always")
def contribution(q, p, S, use_attr):
    c = -2.0 * plogp(q) + plogp(q + p)
    if use_attr:
        c += plogp(p) - S
    return c


@njit(cache=True)
def candidate_deltas(node, labels, p, ow, dang, out_ptr, out_idx, out_f, in_ptr, in_idx, in_f,
                     a_ptr, a_idx, a_val, mp, mn, mF, mD, mq, mS, X, live, n_live, Qsum,
                     n, tau, directed, use_attr, fo, fi, deltas, newinfo):
    """Fill ``deltas[k]`` for every live slot k (the own slot gets +inf).

    Returns the delta for moving ``node`` to a fresh empty module; ``newinfo``
    receives (q, p, S, F, D) of that module.  Scratch arrays ``fo``/``fi``
    must be zero on entry and are zero again on exit.
    """
    i = labels[node]
    pa = p[node]
    da = pa * dang[node]
    for e in range(out_ptr[node], out_ptr[node + 1]):
        fo[labels[out_idx[e]]] += out_f[e]
    for e in range(in_ptr[node], in_ptr[node + 1]):
        fi[labels[in_idx[e]]] += in_f[e]
    owa = ow[node]

    # source module after removal
    n_i = mn[i] - 1
    if n_i == 0:
        q_i = 0.0
        p_i = 0.0
        S_i = 0.0
        F_i = 0.0
    else:
        p_i = mp[i] - pa
        F_i = mF[i] - (owa - fo[i]) + fi[i]
        q_i = exit_rate(F_i, mD[i] - da, p_i, n_i, n, tau, directed)
        S_i = mS[i]
        if use_attr:
            for e in range(a_ptr[node], a_ptr[node + 1]):
                j = a_idx[e]
                old = X[i, j]
                S_i += plogp(old - pa * a_val[e]) - plogp(old)
    d_src = contribution(q_i, p_i, S_i, use_attr) - contribution(mq[i], mp[i], mS[i], use_attr)
    base_Q = Qsum - mq[i] + q_i
    pQ = plogp(Qsum)

    for t in range(n_live):
        k = live[t]
        if k == i:
            deltas[k] = np.inf
            continue
        p_k = mp[k] + pa
        F_k = mF[k] + (owa - fo[k]) - fi[k]
        q_k = exit_rate(F_k, mD[k] + da, p_k, mn[k] + 1, n, tau, directed)
        S_k = mS[k]
        if use_attr:
            for e in range(a_ptr[node], a_ptr[node + 1]):
                j = a_idx[e]
                old = X[k, j]
                S_k += plogp(old + pa * a_val[e]) - plogp(old)
        d_dst = contribution(q_k, p_k, S_k, use_attr) - contribution(mq[k], mp[k], mS[k], use_attr)
        deltas[k] = plogp(base_Q - mq[k] + q_k) - pQ + d_src + d_dst

    # fresh module
    F_new = owa
    q_new = exit_rate(F_new, da, pa, 1, n, tau, directed)
    S_new = 0.0
    if use_attr:
        for e in range(a_ptr[node], a_ptr[node + 1]):
            S_new += plogp(pa * a_val[e])
    d_new = plogp(base_Q + q_new) - pQ + d_src + contribution(q_new, pa, S_new, use_attr)
    newinfo[0] = q_new
    newinfo[1] = pa
    newinfo[2] = S_new
    newinfo[3] = F_new
    newinfo[4] = da

    for e in range(out_ptr[node], out_ptr[node + 1]):
        fo[labels[out_idx[e]]] = 0.0
    for e in range(in_ptr[node], in_ptr[node + 1]):
        fi[labels[in_idx[e]]] = 0.0
    return d_new


@njit(cache=True)
def apply_move(node, k, labels, p, ow, dang, out_ptr, out_idx, out_f, in_ptr, in_idx, in_f,
               a_ptr, a_idx, a_val, mp, mn, mF, mD, mq, mS, X, live, live_pos, n_live,
               free, n_free, Qsum, n, tau, directed, use_attr, fo, fi):
    """Move ``node`` to slot ``k`` (``k < 0`` takes a free slot).

    Returns (new n_live, new n_free, new Qsum, target slot).
    """
    i = labels[node]
    if k < 0:
        n_free -= 1
        k = free[n_free]
        live[n_live] = k
        live_pos[k] = n_live
        n_live += 1
    pa = p[node]
    da = pa * dang[node]
    for e in range(out_ptr[node], out_ptr[node + 1]):
        fo[labels[out_idx[e]]] += out_f[e]
    for e in range(in_ptr[node], in_ptr[node + 1]):
        fi[labels[in_idx[e]]] += in_f[e]
    owa = ow[node]

    Qsum -= mq[i] + mq[k]
    mF[i] = mF[i] - (owa - fo[i]) + fi[i]
    mF[k] = mF[k] + (owa - fo[k]) - fi[k]
    for e in range(out_ptr[node], out_ptr[node + 1]):
        fo[labels[out_idx[e]]] = 0.0
    for e in range(in_ptr[node], in_ptr[node + 1]):
        fi[labels[in_idx[e]]] = 0.0

    mp[i] -= pa
    mp[k] += pa
    mD[i] -= da
    mD[k] += da
    mn[i] -= 1
    mn[k] += 1
    if use_attr:
        for e in range(a_ptr[node], a_ptr[node + 1]):
            j = a_idx[e]
            w = pa * a_val[e]
            old = X[i, j]
            new = old - w
            mS[i] += plogp(new) - plogp(old)
            X[i, j] = new
            old = X[k, j]
            new = old + w
            mS[k] += plogp(new) - plogp(old)
            X[k, j] = new
    labels[node] = k

    if mn[i] == 0:
        mp[i] = 0.0
        mF[i] = 0.0
        mD[i] = 0.0
        mq[i] = 0.0
        mS[i] = 0.0
        if use_attr:
            for j in range(X.shape[1]):
                X[i, j] = 0.0
        pos = live_pos[i]
        last = live[n_live - 1]
        live[pos] = last
        live_pos[last] = pos
        live_pos[i] = -1
        n_live -= 1
        free[n_free] = i
        n_free += 1
    else:
        mq[i] = exit_rate(mF[i], mD[i], mp[i], mn[i], n, tau, directed)
    mq[k] = exit_rate(mF[k], mD[k], mp[k], mn[k], n, tau, directed)
    Qsum += mq[i] + mq[k]
    return n_live, n_free, Qsum, k


@njit(cache=True)
def sweep(order, labels, p, ow, dang, out_ptr, out_idx, out_f, in_ptr, in_idx, in_f,
          a_ptr, a_idx, a_val, mp, mn, mF, mD, mq, mS, X, live, live_pos, n_live,
          free, n_free, Qsum, n, tau, directed, use_attr, eps, fo, fi, deltas, newinfo):
    """One pass over ``order`` applying each node's best strictly improving move.

    Deltas within ``eps`` of each other are ties and go to the smallest slot
    id; a fresh module only wins when better than every existing one by more
    than ``eps``.  Returns (moves, n_live, n_free, Qsum).
    """
    moves = 0
    for t in range(order.shape[0]):
        node = order[t]
        d_new = candidate_deltas(node, labels, p, ow, dang, out_ptr, out_idx, out_f, in_ptr, in_idx,
                                 in_f, a_ptr, a_idx, a_val, mp, mn, mF, mD, mq, mS, X, live, n_live,
                                 Qsum, n, tau, directed, use_attr, fo, fi, deltas, newinfo)
        best = np.inf
        for s in range(n_live):
            v = deltas[live[s]]
            if v < best:
                best = v
        # deltas within eps of the minimum are ties, resolved to the smallest slot
        best_k = -2
        for s in range(n_live):
            k = live[s]
            if deltas[k] <= best + eps and (best_k < 0 or k < best_k):
                best_k = k
        if best_k >= 0:
            best = deltas[best_k]
        # a singleton moving to a fresh module is a relabeling
        if mn[labels[node]] > 1 and n_free > 0 and d_new < best - eps:
            best = d_new
            best_k = -1
        if best < -eps:
            n_live, n_free, Qsum, _ = apply_move(
                node, best_k, labels, p, ow, dang, out_ptr, out_idx, out_f, in_ptr, in_idx, in_f,
                a_ptr, a_idx, a_val, mp, mn, mF, mD, mq, mS, X, live, live_pos, n_live,
                free, n_free, Qsum, n, tau, directed, use_attr, fo, fi)
            moves += 1
    return moves, n_live, n_free, Qsum

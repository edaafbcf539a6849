"""Pure-Python kernels.

Every function here mirrors the compiled backend bit-for-bit: loops run in
the same order and do the same IEEE operations, so results are identical and
the two backends are interchangeable.
"""

import math

import numpy as np

BACKEND = "pure"

INF = math.inf

# Move kind codes, in the sort order of their names.
KIND_INNER_SWAP = 0
KIND_MERGE = 1
KIND_MOVE = 2
KIND_SHIFT = 3
KIND_SPLIT = 4


def floyd_warshall(d):
    """All-pairs shortest paths on a dense float64 matrix, in place."""
    n = d.shape[0]
    for k in range(n):
        # Row k and column k are fixed points of step k, so relaxing with a
        # snapshot of them reproduces the scalar triple loop exactly.
        np.minimum(d, d[:, k, None] + d[None, k, :], out=d)


def free_slot_distance(d, p, exec_slots, occ, vacated=-1, filled=-1):
    """Min distance from node p to an unoccupied executable-trap slot.

    ``vacated``/``filled`` override the occupancy at two nodes so a candidate
    move can be evaluated without copying the occupancy array.
    """
    best = INF
    for s in exec_slots:
        if s == filled:
            continue
        if occ[s] >= 0 and s != vacated:
            continue
        if d[p, s] < best:
            best = d[p, s]
    return best


def _layer_term(pos, off, qs, d, exec_slots, occ, qa, na, qb, nb, vacated, filled):
    acc = 0.0
    for b in range(len(off) - 1):
        s0 = off[b]
        s1 = off[b + 1]
        pairmax = 0.0
        for i in range(s0, s1):
            qi = qs[i]
            pi = pos[qi]
            if qi == qa:
                pi = na
            elif qi == qb:
                pi = nb
            acc += free_slot_distance(d, pi, exec_slots, occ, vacated, filled)
            for j in range(i + 1, s1):
                qj = qs[j]
                pj = pos[qj]
                if qj == qa:
                    pj = na
                elif qj == qb:
                    pj = nb
                dv = d[pi, pj]
                if dv > pairmax:
                    pairmax = dv
        acc += pairmax
    return acc


def _assignment_score(pos, occ, f_off, f_q, e_off, e_q, d, exec_slots, w_e,
                      qa, na, qb, nb, vacated, filled):
    total = 0.0
    nf = len(f_off) - 1
    ne = len(e_off) - 1
    if nf > 0:
        total += _layer_term(pos, f_off, f_q, d, exec_slots, occ,
                             qa, na, qb, nb, vacated, filled) / nf
    if ne > 0 and w_e != 0.0:
        total += w_e * _layer_term(pos, e_off, e_q, d, exec_slots, occ,
                                   qa, na, qb, nb, vacated, filled) / ne
    return total


def score_state(pos, occ, f_off, f_q, e_off, e_q, d, exec_slots, w_e):
    """Heuristic cost of one ion assignment (lower is better, inf allowed)."""
    return _assignment_score(pos, occ, f_off, f_q, e_off, e_q, d, exec_slots,
                             w_e, -1, 0, -1, 0, -1, -1)


def score_moves(kinds, srcs, dsts, pos, occ, f_off, f_q, e_off, e_q, d,
                exec_slots, w_e):
    """Heuristic cost of the assignment after each candidate move."""
    m = len(kinds)
    out = np.empty(m, dtype=np.float64)
    for i in range(m):
        src = srcs[i]
        dst = dsts[i]
        qa = occ[src]
        if kinds[i] == KIND_INNER_SWAP:
            out[i] = _assignment_score(pos, occ, f_off, f_q, e_off, e_q, d,
                                       exec_slots, w_e,
                                       qa, dst, occ[dst], src, -1, -1)
        else:
            out[i] = _assignment_score(pos, occ, f_off, f_q, e_off, e_q, d,
                                       exec_slots, w_e,
                                       qa, dst, -1, 0, src, dst)
    return out


def enumerate_moves(occ, swap_pairs, ms_pairs, move_pairs):
    """All legal single-step moves for an occupancy vector.

    Returns (kinds, srcs, dsts) int32 arrays sorted by (kind, src, dst).
    """
    kinds = []
    srcs = []
    dsts = []
    for i in range(swap_pairs.shape[0]):
        u = swap_pairs[i, 0]
        v = swap_pairs[i, 1]
        uo = occ[u] >= 0
        vo = occ[v] >= 0
        if uo and vo:
            kinds.append(KIND_INNER_SWAP)
            srcs.append(u)
            dsts.append(v)
        elif uo:
            kinds.append(KIND_SHIFT)
            srcs.append(u)
            dsts.append(v)
        elif vo:
            kinds.append(KIND_SHIFT)
            srcs.append(v)
            dsts.append(u)
    for i in range(ms_pairs.shape[0]):
        slot = ms_pairs[i, 0]
        seg = ms_pairs[i, 1]
        so = occ[slot] >= 0
        go = occ[seg] >= 0
        if so and not go:
            kinds.append(KIND_SPLIT)
            srcs.append(slot)
            dsts.append(seg)
        elif go and not so:
            kinds.append(KIND_MERGE)
            srcs.append(seg)
            dsts.append(slot)
    for i in range(move_pairs.shape[0]):
        u = move_pairs[i, 0]
        v = move_pairs[i, 1]
        uo = occ[u] >= 0
        vo = occ[v] >= 0
        if uo and not vo:
            kinds.append(KIND_MOVE)
            srcs.append(u)
            dsts.append(v)
        elif vo and not uo:
            kinds.append(KIND_MOVE)
            srcs.append(v)
            dsts.append(u)
    k = np.asarray(kinds, dtype=np.int32)
    s = np.asarray(srcs, dtype=np.int32)
    t = np.asarray(dsts, dtype=np.int32)
    order = np.lexsort((t, s, k))
    return k[order], s[order], t[order]

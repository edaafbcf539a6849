# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: dense shortest paths, move enumeration, move scoring."""

from libc.math cimport INFINITY
from libc.stdint cimport int32_t

import numpy as np

BACKEND = "compiled"

KIND_INNER_SWAP = 0
KIND_MERGE = 1
KIND_MOVE = 2
KIND_SHIFT = 3
KIND_SPLIT = 4

DEF K_INNER_SWAP = 0
DEF K_MERGE = 1
DEF K_MOVE = 2
DEF K_SHIFT = 3
DEF K_SPLIT = 4


def floyd_warshall(double[:, ::1] d):
    """All-pairs shortest paths on a dense float64 matrix, in place."""
    cdef Py_ssize_t n = d.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double dik, cand
    with nogil:
        for k in range(n):
            for i in range(n):
                dik = d[i, k]
                if dik == INFINITY:
                    continue
                for j in range(n):
                    cand = dik + d[k, j]
                    if cand < d[i, j]:
                        d[i, j] = cand


cdef inline double _free_slot_dist(const double[:, ::1] d, Py_ssize_t p,
                                   const int32_t[::1] exec_slots,
                                   const int32_t[::1] occ,
                                   Py_ssize_t vacated,
                                   Py_ssize_t filled) noexcept nogil:
    cdef double best = INFINITY
    cdef Py_ssize_t i, s
    for i in range(exec_slots.shape[0]):
        s = exec_slots[i]
        if s == filled:
            continue
        if occ[s] >= 0 and s != vacated:
            continue
        if d[p, s] < best:
            best = d[p, s]
    return best


cdef double _layer_term(const int32_t[::1] pos,
                        const int32_t[::1] off, const int32_t[::1] qs,
                        const double[:, ::1] d,
                        const int32_t[::1] exec_slots, const int32_t[::1] occ,
                        Py_ssize_t qa, Py_ssize_t na,
                        Py_ssize_t qb, Py_ssize_t nb,
                        Py_ssize_t vacated, Py_ssize_t filled) noexcept nogil:
    cdef double acc = 0.0
    cdef double pairmax, dv
    cdef Py_ssize_t b, i, j, s0, s1, qi, qj, pi, pj
    for b in range(off.shape[0] - 1):
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
            acc += _free_slot_dist(d, pi, exec_slots, occ, vacated, filled)
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


cdef double _assignment_score(const int32_t[::1] pos, const int32_t[::1] occ,
                              const int32_t[::1] f_off, const int32_t[::1] f_q,
                              const int32_t[::1] e_off, const int32_t[::1] e_q,
                              const double[:, ::1] d,
                              const int32_t[::1] exec_slots, double w_e,
                              Py_ssize_t qa, Py_ssize_t na,
                              Py_ssize_t qb, Py_ssize_t nb,
                              Py_ssize_t vacated,
                              Py_ssize_t filled) noexcept nogil:
    cdef double total = 0.0
    cdef Py_ssize_t nf = f_off.shape[0] - 1
    cdef Py_ssize_t ne = e_off.shape[0] - 1
    if nf > 0:
        total += _layer_term(pos, f_off, f_q, d, exec_slots, occ,
                             qa, na, qb, nb, vacated, filled) / nf
    if ne > 0 and w_e != 0.0:
        total += w_e * _layer_term(pos, e_off, e_q, d, exec_slots, occ,
                                   qa, na, qb, nb, vacated, filled) / ne
    return total


def free_slot_distance(const double[:, ::1] d, Py_ssize_t p,
                       const int32_t[::1] exec_slots, const int32_t[::1] occ,
                       Py_ssize_t vacated=-1, Py_ssize_t filled=-1):
    """Min distance from node p to an unoccupied executable-trap slot."""
    return _free_slot_dist(d, p, exec_slots, occ, vacated, filled)


def score_state(const int32_t[::1] pos, const int32_t[::1] occ,
                const int32_t[::1] f_off, const int32_t[::1] f_q,
                const int32_t[::1] e_off, const int32_t[::1] e_q,
                const double[:, ::1] d, const int32_t[::1] exec_slots,
                double w_e):
    """Heuristic cost of one ion assignment (lower is better, inf allowed)."""
    return _assignment_score(pos, occ, f_off, f_q, e_off, e_q, d, exec_slots,
                             w_e, -1, 0, -1, 0, -1, -1)


def score_moves(const int32_t[::1] kinds, const int32_t[::1] srcs,
                const int32_t[::1] dsts,
                const int32_t[::1] pos, const int32_t[::1] occ,
                const int32_t[::1] f_off, const int32_t[::1] f_q,
                const int32_t[::1] e_off, const int32_t[::1] e_q,
                const double[:, ::1] d, const int32_t[::1] exec_slots,
                double w_e):
    """Heuristic cost of the assignment after each candidate move."""
    cdef Py_ssize_t m = kinds.shape[0]
    out_np = np.empty(m, dtype=np.float64)
    cdef double[::1] out = out_np
    cdef Py_ssize_t i, src, dst, qa
    with nogil:
        for i in range(m):
            src = srcs[i]
            dst = dsts[i]
            qa = occ[src]
            if kinds[i] == K_INNER_SWAP:
                out[i] = _assignment_score(pos, occ, f_off, f_q, e_off, e_q,
                                           d, exec_slots, w_e,
                                           qa, dst, occ[dst], src, -1, -1)
            else:
                out[i] = _assignment_score(pos, occ, f_off, f_q, e_off, e_q,
                                           d, exec_slots, w_e,
                                           qa, dst, -1, 0, src, dst)
    return out_np


def enumerate_moves(const int32_t[::1] occ,
                    const int32_t[:, ::1] swap_pairs,
                    const int32_t[:, ::1] ms_pairs,
                    const int32_t[:, ::1] move_pairs):
    """All legal single-step moves for an occupancy vector.

    Returns (kinds, srcs, dsts) int32 arrays sorted by (kind, src, dst).
    """
    cdef Py_ssize_t cap = (swap_pairs.shape[0] + ms_pairs.shape[0]
                           + move_pairs.shape[0])
    k_np = np.empty(cap, dtype=np.int32)
    s_np = np.empty(cap, dtype=np.int32)
    t_np = np.empty(cap, dtype=np.int32)
    cdef int32_t[::1] k = k_np
    cdef int32_t[::1] s = s_np
    cdef int32_t[::1] t = t_np
    cdef Py_ssize_t m = 0
    cdef Py_ssize_t i, u, v, slot, seg
    cdef bint uo, vo
    with nogil:
        for i in range(swap_pairs.shape[0]):
            u = swap_pairs[i, 0]
            v = swap_pairs[i, 1]
            uo = occ[u] >= 0
            vo = occ[v] >= 0
            if uo and vo:
                k[m] = K_INNER_SWAP
                s[m] = u
                t[m] = v
                m += 1
            elif uo:
                k[m] = K_SHIFT
                s[m] = u
                t[m] = v
                m += 1
            elif vo:
                k[m] = K_SHIFT
                s[m] = v
                t[m] = u
                m += 1
        for i in range(ms_pairs.shape[0]):
            slot = ms_pairs[i, 0]
            seg = ms_pairs[i, 1]
            uo = occ[slot] >= 0
            vo = occ[seg] >= 0
            if uo and not vo:
                k[m] = K_SPLIT
                s[m] = slot
                t[m] = seg
                m += 1
            elif vo and not uo:
                k[m] = K_MERGE
                s[m] = seg
                t[m] = slot
                m += 1
        for i in range(move_pairs.shape[0]):
            u = move_pairs[i, 0]
            v = move_pairs[i, 1]
            uo = occ[u] >= 0
            vo = occ[v] >= 0
            if uo and not vo:
                k[m] = K_MOVE
                s[m] = u
                t[m] = v
                m += 1
            elif vo and not uo:
                k[m] = K_MOVE
                s[m] = v
                t[m] = u
                m += 1
    k_np = k_np[:m]
    s_np = s_np[:m]
    t_np = t_np[:m]
    order = np.lexsort((t_np, s_np, k_np))
    return (np.ascontiguousarray(k_np[order]),
            np.ascontiguousarray(s_np[order]),
            np.ascontiguousarray(t_np[order]))

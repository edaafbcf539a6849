"""Timing comparison between the compiled kernels and the pure fallback."""

from __future__ import annotations

import time

import numpy as np

from ._kernels import _py

try:
    from ._kernels import _cy
except ImportError:
    _cy = None


def _problem(num_nodes=60, num_qubits=24, blocks=12, seed=7):
    rng = np.random.default_rng(seed)
    d = rng.uniform(1.0, 200.0, size=(num_nodes, num_nodes))
    d = np.ascontiguousarray((d + d.T) / 2.0)
    np.fill_diagonal(d, 0.0)
    pos = rng.choice(num_nodes, size=num_qubits, replace=False).astype(np.int32)
    occ = np.full(num_nodes, -1, dtype=np.int32)
    for q, n in enumerate(pos):
        occ[n] = q
    qs = []
    off = [0]
    for _ in range(blocks):
        qs.extend(rng.choice(num_qubits, size=3, replace=False))
        off.append(len(qs))
    f_off = np.asarray(off, dtype=np.int32)
    f_q = np.asarray(qs, dtype=np.int32)
    exec_slots = np.arange(0, num_nodes // 2, dtype=np.int32)
    kinds = np.zeros(40, dtype=np.int32) + 3
    srcs = pos[rng.integers(0, num_qubits, size=40)].astype(np.int32)
    dsts = np.asarray(
        [n for n in range(num_nodes) if occ[n] < 0][:40], dtype=np.int32)
    return d, pos, occ, f_off, f_q, exec_slots, kinds, srcs, dsts


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_kernel_benchmark(repeat=5) -> str:
    d, pos, occ, f_off, f_q, exec_slots, kinds, srcs, dsts = _problem()
    e_off = np.zeros(1, dtype=np.int32)
    e_q = np.zeros(0, dtype=np.int32)

    rows = []
    backends = [("pure", _py)] + ([("compiled", _cy)] if _cy else [])
    for name, mod in backends:
        fw = _time(lambda m=mod: m.floyd_warshall(d.copy()), repeat)
        score = _time(
            lambda m=mod: m.score_moves(kinds, srcs, dsts, pos, occ, f_off,
                                        f_q, e_off, e_q, d, exec_slots, 0.5),
            repeat)
        enum = _time(
            lambda m=mod: m.enumerate_moves(
                occ, np.empty((0, 2), dtype=np.int32),
                np.empty((0, 2), dtype=np.int32),
                np.empty((0, 2), dtype=np.int32)),
            repeat)
        rows.append((name, fw, score, enum))

    lines = [f"{'backend':<10}{'floyd_warshall':>16}{'score_moves':>14}"
             f"{'enumerate':>12}"]
    for name, fw, score, enum in rows:
        lines.append(f"{name:<10}{fw * 1e3:>14.3f}ms{score * 1e6:>12.1f}us"
                     f"{enum * 1e6:>10.1f}us")
    if len(rows) == 2:
        lines.append(f"speedup: floyd_warshall x{rows[0][1] / rows[1][1]:.1f}, "
                     f"score_moves x{rows[0][2] / rows[1][2]:.1f}")
    else:
        lines.append("compiled backend unavailable; showing fallback only")
    return "\n".join(lines) + "\n"

"""Shuttling-aware search over the position graph.

``route`` walks a block dag the SABRE way: execute whatever the front layer
allows, otherwise score every legal move against the front and a lookahead
window and greedily apply the best one. Crowded or full devices defeat the
greedy scores, so a targeted escape procedure relocates one block's ions into
a chosen trap, clearing blockers recursively and pushing stray segment ions
back into traps when paths jam.

``shaper`` mode additionally picks, for every executed block, the qubit-label
permutation that a re-synthesized block could absorb for free; ``shaw`` mode
always keeps the identity.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
import random
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .arch import NODE_SLOT, DistanceMatrix, PositionGraph
from .circuit import BlockDag, FrontState, advance, initial_front
from .errors import CapacityError, RoutingError
from .state import IonAssignment, Move, apply_move, executable_trap
from .state import INNER_SWAP, KIND_NAMES, MERGE, MOVE_KIND, SHIFT, SPLIT

log = logging.getLogger("ionroute")


@dataclass
class SearchConfig:
    """Knobs for routing, layout, and the escape machinery."""

    w_e: float = 0.5                 # lookahead weight
    lookahead: int = 20              # extended-set size in blocks
    permutation_enabled: bool = True  # shaper vs shaw
    cycle_window: int = 8            # repeated-path detection window
    pushback_threshold: float = 0.5  # segment occupancy fraction
    congestion_depth: int = 0        # 0 = number of segment nodes
    layout_passes: int = 3
    seed: int = 0
    move_budget_factor: int = 10_000  # hard cap = factor * block count
    layout_retries: int = 25
    gather_expansions: int = 50_000  # state-search fallback budget

    def __post_init__(self):
        if self.w_e < 0:
            raise ValueError("w_e must be >= 0")
        if self.cycle_window < 2:
            raise ValueError("cycle_window must be >= 2")
        if not 0 < self.pushback_threshold <= 1:
            raise ValueError("pushback_threshold must be in (0, 1]")
        if self.layout_passes < 1:
            raise ValueError("layout_passes must be >= 1")


@dataclass(frozen=True)
class ExecuteBlock:
    """Run one block's gates in a trap, absorbing the chosen permutation."""

    block: int
    trap: str
    perm: tuple
    qubits: tuple
    n_1q: int
    n_2q: int


def default_block_cost(block, perm) -> float:
    """Default permutation oracle: the block's two-qubit gate count."""
    return float(block.two_qubit_gate_count)


def make_table_oracle(table: dict, fallback=default_block_cost):
    """Oracle backed by a {block_id: {"i,j,k": cost}} table."""

    def oracle(block, perm):
        key = ",".join(str(p) for p in perm)
        per_block = table.get(str(block.id), table.get(block.id))
        if per_block is not None and key in per_block:
            return float(per_block[key])
        return fallback(block, perm)

    return oracle


def _qubit_arrays(blocks):
    off = np.zeros(len(blocks) + 1, dtype=np.int32)
    qs = []
    for i, b in enumerate(blocks):
        qs.extend(getattr(b, "qubits", b))
        off[i + 1] = len(qs)
    return off, np.asarray(qs, dtype=np.int32)


def heuristic_score(front_blocks, extended_blocks, phi: IonAssignment,
                    dist: DistanceMatrix, g: PositionGraph,
                    cfg: SearchConfig) -> float:
    """Shuttle-cost score of an assignment against front/lookahead blocks.

    Per block: the largest pairwise distance between its qubits plus each
    qubit's distance to the nearest free executable slot. Front blocks are
    averaged with weight 1, lookahead blocks with weight ``w_e``. Infinite
    when every executable trap is full.
    """
    f_off, f_q = _qubit_arrays(list(front_blocks))
    e_off, e_q = _qubit_arrays(list(extended_blocks))
    return float(_kernels.score_state(
        phi.positions, phi.occupancy, f_off, f_q, e_off, e_q,
        dist.matrix, g.exec_slot_nodes, cfg.w_e))


def fold_permutation(phi: IonAssignment, qubits, perm) -> IonAssignment:
    """Relabel a block's qubits in place: qubit i takes perm[i]'s node."""
    qubits = tuple(qubits)
    out = phi.copy()
    nodes = [phi.position(q) for q in qubits]
    for i, q in enumerate(qubits):
        node = nodes[perm[i]]
        out.positions[q] = node
        out.occupancy[node] = q
    return out


def select_permutation(block, phi: IonAssignment, trap: str, oracle=None, *,
                       fs_after: FrontState = None, dag: BlockDag = None,
                       dist: DistanceMatrix = None, g: PositionGraph = None,
                       cfg: SearchConfig = None):
    """Pick the block permutation with the lowest oracle cost.

    Ties fall to the permutation whose folded assignment scores best against
    the upcoming front, then to lexicographic order (identity first).
    """
    w = block.width
    identity = tuple(range(w))
    if cfg is not None and not cfg.permutation_enabled:
        return identity
    if w <= 1:
        return identity
    oracle = oracle or default_block_cost

    score_ctx = None
    if (fs_after is not None and dag is not None and dist is not None
            and g is not None and cfg is not None and fs_after.front):
        f_arr = _qubit_arrays([dag.blocks[b] for b in fs_after.front])
        e_arr = _qubit_arrays([dag.blocks[b] for b in fs_after.extended])
        score_ctx = (f_arr, e_arr)

    best = None
    for perm in itertools.permutations(range(w)):
        cost = float(oracle(block, perm))
        if score_ctx is None:
            h = 0.0
        else:
            folded = fold_permutation(phi, block.qubits, perm)
            (f_off, f_q), (e_off, e_q) = score_ctx
            h = float(_kernels.score_state(
                folded.positions, folded.occupancy, f_off, f_q, e_off, e_q,
                dist.matrix, g.exec_slot_nodes, cfg.w_e))
        key = (cost, h, perm)
        if best is None or key < best:
            best = key
    return best[2]


def replay(instructions, phi0: IonAssignment, g: PositionGraph) -> IonAssignment:
    """Re-apply an instruction list, validating every step."""
    from .errors import IllegalMoveError

    phi = phi0
    for ins in instructions:
        if isinstance(ins, ExecuteBlock):
            trap = executable_trap(phi, ins.qubits, g)
            if trap != ins.trap:
                raise IllegalMoveError(
                    f"block {ins.block} not co-located in trap {ins.trap!r}")
            phi = fold_permutation(phi, ins.qubits, ins.perm)
        else:
            phi = apply_move(phi, ins, g)
    return phi


# -- path machinery ----------------------------------------------------------

class _Deadlock(Exception):
    pass


def _dijkstra(g: PositionGraph, timing, src: int, targets, occ=None,
              congestion_weight: float = 0.0):
    """Cheapest path from src to any target; None when unreachable.

    ``congestion_weight`` adds a per-occupied-node penalty so paths prefer
    empty corridors when alternatives exist.
    """
    target_set = set(int(t) for t in targets)
    if not target_set:
        return None
    if src in target_set:
        return 0.0, [src]
    dist = {src: 0.0}
    parent = {}
    heap = [(0.0, src)]
    settled = set()
    while heap:
        c, u = heapq.heappop(heap)
        if u in settled:
            continue
        settled.add(u)
        if u in target_set:
            path = [u]
            while path[-1] != src:
                path.append(parent[path[-1]])
            path.reverse()
            return c, path
        for v, label in g.neighbors[u]:
            w = timing.edge_weight(label)
            if congestion_weight and occ is not None and occ[v] >= 0:
                w += congestion_weight
            nc = c + w
            if nc < dist.get(v, math.inf):
                dist[v] = nc
                parent[v] = u
                heapq.heappush(heap, (nc, v))
    return None


class _Orchestrator:
    """Targeted relocation: walks ions along paths, resolving blockers.

    Mutates a working assignment and records every emitted move; the caller
    owns both once a step sequence succeeds.
    """

    def __init__(self, g: PositionGraph, dist: DistanceMatrix,
                 cfg: SearchConfig, phi: IonAssignment):
        self.g = g
        self.dist = dist
        self.timing = dist.timing
        self.cfg = cfg
        self.phi = phi
        self.moves = []
        self.depth = cfg.congestion_depth or max(2, len(g.segment_nodes))
        self.protected = frozenset()  # ions evictions must never expel

    # -- primitive emission ------------------------------------------------

    def _step(self, q: int, src: int, dst: int):
        g = self.g
        sk = g.node_kind[src]
        dk = g.node_kind[dst]
        if sk == NODE_SLOT and dk == NODE_SLOT:
            kind = SHIFT
        elif sk == NODE_SLOT:
            kind = SPLIT
        elif dk == NODE_SLOT:
            kind = MERGE
        else:
            kind = MOVE_KIND
        mv = Move(kind, src, dst, q)
        self.phi = apply_move(self.phi, mv, g)
        self.moves.append(mv)

    def _swap_step(self, u: int, v: int):
        mv = Move(INNER_SWAP, u, v, self.phi.occupant(u), self.phi.occupant(v))
        self.phi = apply_move(self.phi, mv, self.g)
        self.moves.append(mv)

    # -- congestion resolution ----------------------------------------------

    def resolve(self, p1: int, p2: int, avoid, depth: int, busy=None) -> bool:
        """Clear p2 and advance p1's ion into it. False on deadlock.

        ``busy`` holds the chain of nodes already being resolved, so deeper
        calls never displace the original mover or loop back on themselves.
        """
        if depth <= 0:
            return False
        busy = (busy or frozenset()) | {p1, p2}
        phi = self.phi
        neigh = [v for v, _ in self.g.neighbors[p2]
                 if v not in busy and v not in avoid]
        for v in neigh:
            if not phi.is_occupied(v):
                self._step(phi.occupant(p2), p2, v)
                self._step(self.phi.occupant(p1), p1, p2)
                return True
        for v in neigh:
            if self.phi.is_occupied(v):
                if self.resolve(p2, v, avoid, depth - 1, busy):
                    self._step(self.phi.occupant(p1), p1, p2)
                    return True
        return False

    # -- in-trap compaction --------------------------------------------------

    def _make_room_at(self, trap_index: int, entry: int):
        """Slide a hole inside the trap to the entry slot, by shifts."""
        g = self.g
        phi = self.phi
        slots = g.trap_slots(trap_index)
        holes = [s for s in slots if not phi.is_occupied(s)]
        if not holes:
            raise _Deadlock(f"trap {g.trap_ids[trap_index]} is full")
        hole = min(holes, key=lambda s: abs(s - entry))
        while hole != entry:
            nxt = hole + 1 if entry > hole else hole - 1
            self._step(self.phi.occupant(nxt), nxt, hole)
            hole = nxt

    def _free_slots(self, trap_index: int) -> int:
        return sum(1 for s in self.g.trap_slots(trap_index)
                   if not self.phi.is_occupied(s))

    # -- walking -------------------------------------------------------------

    def walk(self, q: int, path, avoid):
        """Advance ion q along path, resolving blockers as they appear."""
        g = self.g
        guard = 4 * len(path) + 8
        while self.phi.position(q) != path[-1]:
            guard -= 1
            if guard < 0:
                raise _Deadlock("walk made no progress")
            cur = self.phi.position(q)
            if cur not in path:
                raise _Deadlock("mover was displaced off its path")
            nxt = path[path.index(cur) + 1]
            if not self.phi.is_occupied(nxt):
                self._step(q, cur, nxt)
            elif (g.node_kind[cur] == NODE_SLOT and g.node_kind[nxt] == NODE_SLOT
                  and g.node_trap[cur] == g.node_trap[nxt]):
                self._swap_step(cur, nxt)
            elif g.node_kind[nxt] == NODE_SLOT:
                # Blocked merge: compact the trap so the entry slot frees
                # up, clearing one ion out first when it is packed full.
                # Either can shuffle other ions around, so loop back and
                # re-read the mover's position before stepping.
                ti = int(g.node_trap[nxt])
                if self._free_slots(ti) == 0:
                    self.evict_one(ti, {q}, avoid)
                self._make_room_at(ti, nxt)
            else:
                if not self.resolve(cur, nxt, avoid, self.depth):
                    raise _Deadlock(f"cannot clear node {nxt}")

    # -- eviction and relocation ----------------------------------------------

    def _relocate_off(self, q: int, exclude_trap: int, avoid):
        """Walk a displaced ion to another free trap, or park it off-avoid."""
        g = self.g
        cur = self.phi.position(q)
        entries = []
        for ti in range(len(g.trap_ids)):
            if ti == exclude_trap or self._free_slots(ti) == 0:
                continue
            entries.extend(slot for slot, _ in g.trap_attached_ends[ti])
        res = _dijkstra(g, self.timing, cur, entries, self.phi.occupancy,
                        self.timing.inner_swap)
        if res is not None:
            self.walk(q, res[1], avoid | set(res[1][:-1]))
            return
        parks = [int(s) for s in g.segment_nodes
                 if s != cur and not self.phi.is_occupied(s) and s not in avoid]
        res = _dijkstra(g, self.timing, cur, parks, self.phi.occupancy,
                        self.timing.inner_swap)
        if res is not None:
            self.walk(q, res[1], avoid)
            return
        if cur in avoid:
            raise _Deadlock("displaced ion has nowhere to go")

    def evict_one(self, trap_index: int, protected, avoid):
        """Push one non-protected ion out of a full trap and out of the way."""
        g = self.g
        protected = set(protected) | self.protected
        ends = g.trap_attached_ends[trap_index]
        if not ends:
            raise _Deadlock("target trap has no attached segment")
        victims = [s for s in g.trap_slots(trap_index)
                   if self.phi.occupant(s) not in protected]
        if not victims:
            raise _Deadlock("trap holds only protected ions")
        best = None
        for end_slot, seg in ends:
            node = min(victims, key=lambda s: (abs(s - end_slot), s))
            # Prefer exits whose segment is empty and off the active path.
            blocked = 1 if (self.phi.is_occupied(seg) or seg in avoid) else 0
            key = (blocked, abs(node - end_slot), end_slot)
            if best is None or key < best[0]:
                best = (key, node, end_slot, seg)
        _, node, end_slot, seg = best
        while node != end_slot:
            nxt = node + 1 if end_slot > node else node - 1
            self._swap_step(node, nxt)
            node = nxt
        victim = self.phi.occupant(end_slot)
        if self.phi.is_occupied(seg):
            if not self.resolve(end_slot, seg, avoid, self.depth):
                raise _Deadlock("cannot clear the trap exit")
        else:
            self._step(victim, end_slot, seg)
        self._relocate_off(victim, trap_index, avoid)

    # -- push-back -------------------------------------------------------------

    def segment_occupancy(self) -> float:
        segs = self.g.segment_nodes
        if len(segs) == 0:
            return 0.0
        occupied = sum(1 for s in segs if self.phi.is_occupied(s))
        return occupied / len(segs)

    def push_back(self):
        """Return stray segment ions to the nearest traps, nearest first."""
        g = self.g
        while True:
            floaters = [int(s) for s in g.segment_nodes if self.phi.is_occupied(s)]
            if not floaters:
                return
            entries = []
            for ti in range(len(g.trap_ids)):
                if self._free_slots(ti) > 0:
                    entries.extend(slot for slot, _ in g.trap_attached_ends[ti])
            ranked = []
            for s in floaters:
                res = _dijkstra(g, self.timing, s, entries,
                                self.phi.occupancy, self.timing.inner_swap)
                if res is not None:
                    ranked.append((res[0], self.phi.occupant(s), res[1]))
            if not ranked:
                return
            ranked.sort(key=lambda r: (r[0], r[1]))
            progress = False
            for _, q, path in ranked:
                snap_phi = self.phi.copy()
                snap_len = len(self.moves)
                try:
                    self.walk(q, path, set(path))
                    progress = True
                    break
                except _Deadlock:
                    self.phi = snap_phi
                    del self.moves[snap_len:]
            if not progress:
                return

    # -- escape --------------------------------------------------------------

    def _entry_cost(self, q: int, trap_index: int):
        g = self.g
        if g.node_trap[self.phi.position(q)] == trap_index:
            return 0.0
        entries = [slot for slot, _ in g.trap_attached_ends[trap_index]]
        res = _dijkstra(g, self.timing, self.phi.position(q), entries,
                        self.phi.occupancy, self.timing.inner_swap)
        return math.inf if res is None else res[0]

    def select_trap(self, qubits) -> int:
        """Cheapest executable trap to gather the qubits in."""
        g = self.g
        best = None
        for ti in range(len(g.trap_ids)):
            if not g.trap_executable[ti]:
                continue
            if int(g.trap_capacity[ti]) < len(qubits):
                continue
            total = 0.0
            for q in qubits:
                total += self._entry_cost(q, ti)
                if math.isinf(total):
                    break
            if math.isinf(total):
                continue
            key = (total, ti)
            if best is None or key < best:
                best = key
        if best is None:
            raise _Deadlock("no executable trap is reachable")
        return best[1]

    def escape_once(self, qubits):
        """Gather a block's qubits into one executable trap."""
        g = self.g
        self.protected = frozenset(qubits)
        if self.segment_occupancy() > self.cfg.pushback_threshold:
            self.push_back()
        trap_index = self.select_trap(qubits)
        order = sorted(qubits, key=lambda q: (self._entry_cost(q, trap_index), q))
        trap_slots = set(g.trap_slots(trap_index))
        entries = [slot for slot, _ in g.trap_attached_ends[trap_index]]
        for q in order:
            if g.node_trap[self.phi.position(q)] == trap_index:
                continue
            res = _dijkstra(g, self.timing, self.phi.position(q), entries,
                            self.phi.occupancy, self.timing.inner_swap)
            if res is None:
                raise _Deadlock(f"qubit {q} cannot reach the target trap")
            if self._free_slots(trap_index) == 0:
                self.evict_one(trap_index, set(qubits),
                               set(res[1]) | trap_slots)
                # Clearing the trap may have compacted ions or rerouted the
                # corridor; plan the approach afresh.
                res = _dijkstra(g, self.timing, self.phi.position(q), entries,
                                self.phi.occupancy, self.timing.inner_swap)
                if res is None:
                    raise _Deadlock(f"qubit {q} cannot reach the target trap")
            self.walk(q, res[1], set(res[1]) | trap_slots)


def _move_duration(mv: Move, timing) -> float:
    if mv.kind == SPLIT:
        return timing.split
    if mv.kind == MERGE:
        return timing.merge
    if mv.kind == MOVE_KIND:
        return timing.move
    return timing.inner_swap


def _gather_search(phi0: IonAssignment, g: PositionGraph,
                   dist: DistanceMatrix, qubits, max_expansions: int):
    """Exact search over assignments until the qubits share an executable trap.

    Weighted A* over move sequences; the bound keeps hopeless instances from
    running away. Returns (moves, phi', expansions) with moves None when the
    search gave up. The greedy escape handles almost everything; this tier
    exists for corridor devices whose solutions need ions to leapfrog through
    intermediate traps.
    """
    timing = dist.timing
    durations = np.array([timing.inner_swap, timing.merge, timing.move,
                          timing.inner_swap, timing.split])
    exit_cost = min(timing.split, timing.merge)
    d = dist.matrix
    qarr = np.asarray(qubits, dtype=np.int64)
    in_block = np.zeros(phi0.num_qubits, dtype=bool)
    in_block[qarr] = True
    trap_min = []   # per candidate trap, distance from any node to its slots
    for ti in range(len(g.trap_ids)):
        if g.trap_executable[ti] and int(g.trap_capacity[ti]) >= len(qubits):
            slots = np.asarray(list(g.trap_slots(ti)), dtype=np.int64)
            trap_min.append((ti, d[:, slots].min(axis=1), slots,
                             int(g.trap_capacity[ti])))
    if not trap_min:
        return None, None, 0

    node_trap = g.node_trap
    trap_ok = {ti for ti, _, _, _ in trap_min}

    def done(pos):
        t = node_trap[pos[qarr[0]]]
        if t < 0 or t not in trap_ok:
            return False
        return all(node_trap[pos[q]] == t for q in qarr[1:])

    def lower_bound(pos, occ):
        # Approach distances plus the exits a full target trap forces.
        best = math.inf
        for _, dmin, slots, cap in trap_min:
            total = dmin[pos[qarr]].sum()
            occupants = occ[slots]
            strangers = int(np.count_nonzero(
                (occupants >= 0) & ~in_block[occupants]))
            overflow = strangers + len(qarr) - cap
            if overflow > 0:
                total += overflow * exit_cost
            if total < best:
                best = total
        return best

    eps = 1.0 if phi0.num_qubits <= 4 else 2.0
    pos0 = phi0.positions.copy()
    occ0 = phi0.occupancy.copy()
    start_key = pos0.tobytes()
    best_cost = {start_key: 0.0}
    came = {start_key: None}
    heap = [(eps * lower_bound(pos0, occ0), 0, 0.0, start_key, pos0, occ0)]
    counter = 1
    settled = set()
    expansions = 0
    goal_key = None
    while heap and expansions < max_expansions:
        _, _, cost, key, pos, occ = heapq.heappop(heap)
        if key in settled:
            continue
        settled.add(key)
        if done(pos):
            goal_key = key
            break
        expansions += 1
        kinds, srcs, dsts = _kernels.enumerate_moves(
            occ, g.swap_pairs, g.ms_pairs, g.move_pairs)
        for i in range(len(kinds)):
            k, src, dst = int(kinds[i]), int(srcs[i]), int(dsts[i])
            pos2 = pos.copy()
            occ2 = occ.copy()
            qa = occ[src]
            if k == _kernels.KIND_INNER_SWAP:
                qb = occ[dst]
                pos2[qa] = dst
                pos2[qb] = src
                occ2[src] = qb
                occ2[dst] = qa
            else:
                pos2[qa] = dst
                occ2[src] = -1
                occ2[dst] = qa
            k2 = pos2.tobytes()
            c2 = cost + durations[k]
            if c2 < best_cost.get(k2, math.inf):
                best_cost[k2] = c2
                came[k2] = (key, k, src, dst)
                heapq.heappush(heap, (c2 + eps * lower_bound(pos2, occ2), counter,
                                      c2, k2, pos2, occ2))
                counter += 1
    if goal_key is None:
        return None, None, expansions
    steps = []
    k = goal_key
    while came[k] is not None:
        prev_key, kind, src, dst = came[k]
        steps.append((kind, src, dst))
        k = prev_key
    steps.reverse()
    moves = []
    phi = phi0
    for kind, src, dst in steps:
        name = KIND_NAMES[kind]
        q2 = phi.occupant(dst) if name == INNER_SWAP else -1
        mv = Move(name, src, dst, phi.occupant(src), -1 if q2 is None else q2)
        phi = apply_move(phi, mv, g)
        moves.append(mv)
    return moves, phi, expansions


def resolve_congestion(p1: int, p2: int, path, phi: IonAssignment,
                       g: PositionGraph, depth: int, dist=None, cfg=None):
    """Clear node p2 (off the path) and advance p1's ion into it.

    Returns (moves, phi') or None when the recursion cannot find room.
    """
    cfg = cfg or SearchConfig()
    if dist is None:
        from .arch import TimingModel, all_pairs_shuttle_cost
        dist = all_pairs_shuttle_cost(g, TimingModel())
    orch = _Orchestrator(g, dist, cfg, phi.copy())
    if orch.resolve(p1, p2, set(path), depth):
        return orch.moves, orch.phi
    return None


def escape_local_minimum(block, phi: IonAssignment, g: PositionGraph,
                         dist: DistanceMatrix, cfg: SearchConfig,
                         gather_pool=None):
    """Relocate one block's qubits into a single executable trap.

    Returns (moves, phi'). Raises RoutingError when even push-back and the
    bounded state search cannot untangle the device. ``gather_pool`` is a
    one-element expansion budget shared across one routing run.
    """
    qubits = tuple(getattr(block, "qubits", block))
    if executable_trap(phi, qubits, g) is not None:
        return [], phi
    if phi.num_qubits <= 4 and g.num_nodes <= 12:
        # Tiny state space: the exact search is instant and optimal, and
        # greedy walks on cramped corridor devices can be far from it.
        moves, phi_final, _ = _gather_search(phi, g, dist, qubits,
                                             cfg.gather_expansions)
        if moves is not None:
            return moves, phi_final
    orch = _Orchestrator(g, dist, cfg, phi.copy())
    stuck = None
    for round_no in range(4):
        try:
            orch.escape_once(qubits)
            return orch.moves, orch.phi
        except _Deadlock as exc:
            stuck = exc
            before = len(orch.moves)
            orch.push_back()
            if len(orch.moves) == before and round_no > 0:
                break
    allowance = cfg.gather_expansions
    if gather_pool is not None:
        allowance = min(allowance, gather_pool[0])
    if allowance <= 0:
        raise RoutingError(
            f"cannot gather qubits {qubits}: search budget exhausted")
    moves, phi_final, used = _gather_search(orch.phi, g, dist, qubits,
                                            allowance)
    if moves is None:
        # Only fruitless searches count against the shared pool; they are
        # what makes hopeless instances expensive.
        if gather_pool is not None:
            gather_pool[0] -= used
        raise RoutingError(
            f"cannot gather qubits {qubits} into an executable trap "
            f"({stuck})")
    log.info("state search rescued a stuck block (%d moves)", len(moves))
    return orch.moves + moves, phi_final


# -- main search ---------------------------------------------------------------

def _stuck_block(dag: BlockDag, front, phi: IonAssignment,
                 dist: DistanceMatrix) -> int:
    """Front block with the smallest total pairwise distance."""
    d = dist.matrix
    best = None
    for b in front:
        qs = dag.blocks[b].qubits
        total = 0.0
        for i in range(len(qs)):
            for j in range(i + 1, len(qs)):
                total += d[phi.position(qs[i]), phi.position(qs[j])]
        key = (total, b)
        if best is None or key < best:
            best = key
    return best[1]


def route(dag: BlockDag, phi0: IonAssignment, g: PositionGraph,
          dist: DistanceMatrix, cfg: SearchConfig, oracle=None):
    """Search for a valid instruction list executing every block.

    Returns (instructions, final assignment).
    """
    exec_caps = [int(g.trap_capacity[ti]) for ti in range(len(g.trap_ids))
                 if g.trap_executable[ti]]
    max_cap = max(exec_caps, default=0)
    for b in dag.blocks:
        if b.width > max_cap:
            raise CapacityError(
                f"block {b.id} spans {b.width} qubits but the widest "
                f"executable trap holds {max_cap}")
    if phi0.num_qubits != dag.num_qubits:
        raise ValueError("assignment qubit count does not match the dag")
    oracle = oracle or default_block_cost

    phi = phi0.copy()
    instrs = []
    fs = initial_front(dag, cfg.lookahead)
    budget = cfg.move_budget_factor * max(1, len(dag))
    window = deque(maxlen=cfg.cycle_window)
    # The search is deterministic, so revisiting an assignment between two
    # executions proves the greedy walk is orbiting; the window alone misses
    # cycles longer than itself.
    seen_states = set()
    front_arrays = None
    failed_escapes = set()
    gather_pool = [2 * cfg.gather_expansions]

    def spend(n):
        nonlocal budget
        budget -= n
        if budget < 0:
            raise RoutingError(
                "shuttle budget exhausted; the instance looks unroutable")

    epoch_phi = phi.copy()
    epoch_len = 0

    while fs.front:
        # Execute every block the current assignment allows, re-checking
        # after each execution since merges of permutations change nothing
        # but later blocks may share a trap.
        executed = True
        while executed and fs.front:
            executed = False
            for b in fs.front:
                block = dag.blocks[b]
                trap = executable_trap(phi, block.qubits, g)
                if trap is None:
                    continue
                fs_next = advance(fs, dag, b)
                perm = select_permutation(
                    block, phi, trap, oracle, fs_after=fs_next, dag=dag,
                    dist=dist, g=g, cfg=cfg)
                phi = fold_permutation(phi, block.qubits, perm)
                instrs.append(ExecuteBlock(b, trap, perm, block.qubits,
                                           block.n_1q, block.n_2q))
                fs = fs_next
                front_arrays = None
                failed_escapes.clear()
                window.clear()
                seen_states.clear()
                epoch_phi = phi.copy()
                epoch_len = len(instrs)
                executed = True
                break
        if not fs.front:
            break

        if front_arrays is None:
            f_arr = _qubit_arrays([dag.blocks[b] for b in fs.front])
            e_arr = _qubit_arrays([dag.blocks[b] for b in fs.extended])
            front_arrays = (f_arr, e_arr)
        (f_off, f_q), (e_off, e_q) = front_arrays

        kinds, srcs, dsts = _kernels.enumerate_moves(
            phi.occupancy, g.swap_pairs, g.ms_pairs, g.move_pairs)
        best_idx = -1
        if len(kinds):
            scores = _kernels.score_moves(
                kinds, srcs, dsts, phi.positions, phi.occupancy,
                f_off, f_q, e_off, e_q, dist.matrix, g.exec_slot_nodes,
                cfg.w_e)
            best_idx = int(np.argmin(scores))
            here = _kernels.score_state(
                phi.positions, phi.occupancy, f_off, f_q, e_off, e_q,
                dist.matrix, g.exec_slot_nodes, cfg.w_e)
            # No move improves on standing still: a greedy plateau or a
            # local minimum (the final merge into a trap often scores worse
            # because it eats the last nearby free slot).
            if math.isinf(scores[best_idx]) or scores[best_idx] >= here:
                best_idx = -1

        if best_idx >= 0:
            k = int(kinds[best_idx])
            src = int(srcs[best_idx])
            dst = int(dsts[best_idx])
            name = KIND_NAMES[k]
            q2 = phi.occupant(dst) if name == INNER_SWAP else -1
            mv = Move(name, src, dst, phi.occupant(src),
                      -1 if q2 is None else q2)
            phi_next = apply_move(phi, mv, g)
            state = phi_next.key()
            key = (k, src, dst, state)
            if key not in window and state not in seen_states:
                window.append(key)
                seen_states.add(state)
                phi = phi_next
                instrs.append(mv)
                spend(1)
                continue
            # Repeated state: the greedy score is cycling.

        window.clear()
        seen_states.clear()
        # The greedy moves since the last execution enabled nothing; drop
        # them and let the targeted escape plan from the cleaner state.
        phi = epoch_phi.copy()
        del instrs[epoch_len:]
        stuck = _stuck_block(dag, fs.front, phi, dist)
        candidates = [stuck] + [b for b in fs.front if b != stuck]
        escaped = False
        for b in candidates:
            if b in failed_escapes:
                continue
            try:
                moves, phi_after = escape_local_minimum(
                    dag.blocks[b], phi, g, dist, cfg, gather_pool)
            except RoutingError:
                failed_escapes.add(b)
                continue
            if executable_trap(phi_after, dag.blocks[b].qubits, g) is None:
                # The gather fell apart (an eviction detour undid it);
                # trying the same block again would loop.
                failed_escapes.add(b)
                continue
            phi = phi_after
            instrs.extend(moves)
            spend(len(moves))
            escaped = True
            break
        if not escaped:
            raise RoutingError(
                "no front block can be gathered into an executable trap")

    return instrs, phi


def initial_layout(dag: BlockDag, g: PositionGraph, dist: DistanceMatrix,
                   cfg: SearchConfig, oracle=None) -> IonAssignment:
    """Seeded random placement refined by alternating routing passes.

    The assignment that would enter the final forward pass is returned.
    Random placements that make the dag unroutable (possible on devices with
    narrow corridors at full capacity) are re-drawn from the same stream.
    """
    all_slots = [s for ti in range(len(g.trap_ids)) for s in g.trap_slots(ti)]
    if dag.num_qubits > len(all_slots):
        raise CapacityError(
            f"{dag.num_qubits} qubits exceed the {len(all_slots)} trap slots")
    rng = random.Random(cfg.seed)
    last_error = None
    for _ in range(cfg.layout_retries):
        nodes = rng.sample(all_slots, dag.num_qubits)
        phi = IonAssignment(nodes, g.num_nodes)
        try:
            for i in range(cfg.layout_passes - 1):
                reverse = (cfg.layout_passes - 2 - i) % 2 == 0
                d = dag.reversed() if reverse else dag
                _, phi = route(d, phi, g, dist, cfg, oracle)
            return phi
        except RoutingError as exc:
            last_error = exc
            log.info("layout attempt failed (%s); redrawing placement", exc)
    raise RoutingError(
        f"no routable initial layout found in {cfg.layout_retries} draws: "
        f"{last_error}")

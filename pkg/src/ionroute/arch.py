"""QCCD device model and its position-graph abstraction.

A device is a set of linear traps (chains of ion slots), junctions, and
segments (shuttling paths). The position graph has one node per possible ion
position (trap slot or segment) and labeled edges for the legal single-step
transitions: ``swap`` inside a trap, ``merge_split`` between a trap end and a
segment, ``move`` between two segments meeting at a junction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ArchitectureError

SWAP = "swap"
MERGE_SPLIT = "merge_split"
MOVE = "move"

EXECUTABLE = "executable"
STORAGE = "storage"

NODE_SLOT = 0
NODE_SEGMENT = 1


@dataclass(frozen=True)
class TimingModel:
    """Operation durations in microseconds."""

    split: float = 80.0
    merge: float = 80.0
    move: float = 100.0
    inner_swap: float = 120.0
    gate_1q: float = 30.0
    gate_2q: float = 100.0

    def __post_init__(self):
        for name in ("split", "merge", "move", "inner_swap", "gate_1q", "gate_2q"):
            if getattr(self, name) <= 0:
                raise ValueError(f"duration {name!r} must be positive")

    def edge_weight(self, label: str) -> float:
        """Distance-matrix weight of one position-graph edge."""
        if label == SWAP:
            return self.inner_swap
        if label == MERGE_SPLIT:
            # Direction-free conservative weight; the schedule bills the
            # actual split/merge durations.
            return max(self.split, self.merge)
        if label == MOVE:
            return self.move
        raise ValueError(f"unknown edge label {label!r}")

    def to_dict(self) -> dict:
        return {
            "split": self.split,
            "merge": self.merge,
            "move": self.move,
            "inner_swap": self.inner_swap,
            "gate_1q": self.gate_1q,
            "gate_2q": self.gate_2q,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TimingModel":
        return cls(**{k: float(v) for k, v in d.items()})


@dataclass(frozen=True)
class TrapSpec:
    id: str
    capacity: int
    kind: str = EXECUTABLE
    ends: tuple = (None, None)  # segment id attached at slot 0 / slot capacity-1


@dataclass(frozen=True)
class JunctionSpec:
    id: str
    segments: tuple


@dataclass(frozen=True)
class SegmentSpec:
    id: str


@dataclass
class ArchitectureSpec:
    """Declarative QCCD device description."""

    traps: list = field(default_factory=list)
    junctions: list = field(default_factory=list)
    segments: list = field(default_factory=list)

    def validate(self) -> None:
        """Raise ArchitectureError unless the description is well formed."""
        trap_ids = [t.id for t in self.traps]
        junction_ids = [j.id for j in self.junctions]
        segment_ids = [s.id for s in self.segments]
        for label, ids in (("trap", trap_ids), ("junction", junction_ids),
                           ("segment", segment_ids)):
            if len(set(ids)) != len(ids):
                raise ArchitectureError(f"duplicate {label} id")
        if not self.traps:
            raise ArchitectureError("device needs at least one trap")
        seg_set = set(segment_ids)

        endpoints = {s: [] for s in segment_ids}
        for t in self.traps:
            if t.capacity < 1:
                raise ArchitectureError(f"trap {t.id!r} capacity must be >= 1")
            if t.kind not in (EXECUTABLE, STORAGE):
                raise ArchitectureError(f"trap {t.id!r} has unknown kind {t.kind!r}")
            if len(t.ends) != 2:
                raise ArchitectureError(f"trap {t.id!r} must list two ends")
            for e, seg in enumerate(t.ends):
                if seg is None:
                    continue
                if seg not in seg_set:
                    raise ArchitectureError(
                        f"trap {t.id!r} end {e} attaches unknown segment {seg!r}")
                endpoints[seg].append(("trap", t.id, e))
        for j in self.junctions:
            if len(set(j.segments)) != len(j.segments):
                raise ArchitectureError(f"junction {j.id!r} attaches a segment twice")
            if len(j.segments) < 2:
                raise ArchitectureError(f"junction {j.id!r} degree must be >= 2")
            for seg in j.segments:
                if seg not in seg_set:
                    raise ArchitectureError(
                        f"junction {j.id!r} attaches unknown segment {seg!r}")
                endpoints[seg].append(("junction", j.id))
        for seg, eps in endpoints.items():
            if len(eps) != 2:
                raise ArchitectureError(
                    f"segment {seg!r} has {len(eps)} endpoints, expected 2")

        if not any(t.kind == EXECUTABLE for t in self.traps):
            raise ArchitectureError("device needs at least one executable trap")

        # Device-graph connectivity over traps and junctions.
        adj = {("trap", t.id): set() for t in self.traps}
        adj.update({("junction", j.id): set() for j in self.junctions})
        for seg, eps in endpoints.items():
            a = eps[0][:2]
            b = eps[1][:2]
            adj[a].add(b)
            adj[b].add(a)
        start = next(iter(adj))
        seen = {start}
        stack = [start]
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        if len(seen) != len(adj):
            raise ArchitectureError("device graph is not connected")

    def segment_endpoints(self) -> dict:
        """Map segment id -> list of ('trap', id, end) / ('junction', id)."""
        eps = {s.id: [] for s in self.segments}
        for t in self.traps:
            for e, seg in enumerate(t.ends):
                if seg is not None:
                    eps[seg].append(("trap", t.id, e))
        for j in self.junctions:
            for seg in j.segments:
                eps[seg].append(("junction", j.id))
        return eps

    def to_dict(self) -> dict:
        return {
            "traps": [
                {"id": t.id, "capacity": t.capacity, "kind": t.kind,
                 "ends": [t.ends[0], t.ends[1]]}
                for t in self.traps
            ],
            "junctions": [
                {"id": j.id, "segments": list(j.segments)} for j in self.junctions
            ],
            "segments": [{"id": s.id} for s in self.segments],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ArchitectureSpec":
        try:
            traps = [
                TrapSpec(t["id"], int(t["capacity"]), t.get("kind", EXECUTABLE),
                         (t.get("ends", [None, None])[0],
                          t.get("ends", [None, None])[1]))
                for t in d["traps"]
            ]
            junctions = [
                JunctionSpec(j["id"], tuple(j["segments"])) for j in d.get("junctions", [])
            ]
            segments = [SegmentSpec(s["id"]) for s in d.get("segments", [])]
        except (KeyError, TypeError, IndexError) as exc:
            raise ArchitectureError(f"malformed architecture document: {exc}") from exc
        return cls(traps, junctions, segments)

    @classmethod
    def from_json(cls, text: str) -> "ArchitectureSpec":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ArchitectureError(f"architecture file is not valid JSON: {exc}") from exc
        return cls.from_dict(d)


def preset(name: str, capacity: int = 3) -> ArchitectureSpec:
    """Built-in devices: H (4 traps), G2x3 (6 traps), MINI (2 traps)."""
    if capacity < 1:
        raise ArchitectureError("capacity must be >= 1")
    if name == "H":
        # Two columns of two traps, Y-junctions joined by the crossbar s3.
        traps = [
            TrapSpec("t1", capacity, EXECUTABLE, ("s1", None)),
            TrapSpec("t2", capacity, EXECUTABLE, ("s2", None)),
            TrapSpec("t3", capacity, EXECUTABLE, ("s4", None)),
            TrapSpec("t4", capacity, EXECUTABLE, ("s5", None)),
        ]
        segments = [SegmentSpec(f"s{i}") for i in range(1, 6)]
        junctions = [
            JunctionSpec("j1", ("s1", "s2", "s3")),
            JunctionSpec("j2", ("s3", "s4", "s5")),
        ]
        return ArchitectureSpec(traps, junctions, segments)
    if name == "G2x3":
        # H plus a third trap column; the middle junction becomes degree 4.
        traps = [
            TrapSpec("t1", capacity, EXECUTABLE, ("s1", None)),
            TrapSpec("t2", capacity, EXECUTABLE, ("s2", None)),
            TrapSpec("t3", capacity, EXECUTABLE, ("s4", None)),
            TrapSpec("t4", capacity, EXECUTABLE, ("s5", None)),
            TrapSpec("t5", capacity, EXECUTABLE, ("s7", None)),
            TrapSpec("t6", capacity, EXECUTABLE, ("s8", None)),
        ]
        segments = [SegmentSpec(f"s{i}") for i in range(1, 9)]
        junctions = [
            JunctionSpec("j1", ("s1", "s2", "s3")),
            JunctionSpec("j2", ("s3", "s4", "s5", "s6")),
            JunctionSpec("j3", ("s6", "s7", "s8")),
        ]
        return ArchitectureSpec(traps, junctions, segments)
    if name == "MINI":
        traps = [
            TrapSpec("t1", capacity, EXECUTABLE, ("s1", None)),
            TrapSpec("t2", capacity, EXECUTABLE, ("s2", None)),
        ]
        segments = [SegmentSpec("s1"), SegmentSpec("s2")]
        junctions = [JunctionSpec("j1", ("s1", "s2"))]
        return ArchitectureSpec(traps, junctions, segments)
    raise ArchitectureError(f"unknown preset {name!r}")


PRESET_NAMES = ("H", "G2x3", "MINI")


class PositionGraph:
    """Labeled undirected graph of ion positions. Immutable once built."""

    def __init__(self, spec: ArchitectureSpec):
        spec.validate()
        self.spec = spec

        self.trap_ids = sorted(t.id for t in spec.traps)
        by_id = {t.id: t for t in spec.traps}
        self.trap_capacity = np.array(
            [by_id[t].capacity for t in self.trap_ids], dtype=np.int32)
        self.trap_executable = np.array(
            [by_id[t].kind == EXECUTABLE for t in self.trap_ids], dtype=bool)
        self._trap_index = {t: i for i, t in enumerate(self.trap_ids)}

        self.segment_ids = sorted(s.id for s in spec.segments)
        self._segment_index = {s: i for i, s in enumerate(self.segment_ids)}

        # Nodes: trap slots in trap-id order, then segments in id order.
        names = []
        kinds = []
        traps = []
        slots = []
        self.trap_slot_offset = np.zeros(len(self.trap_ids), dtype=np.int32)
        for ti, tid in enumerate(self.trap_ids):
            self.trap_slot_offset[ti] = len(names)
            for s in range(by_id[tid].capacity):
                names.append(f"{tid}:{s}")
                kinds.append(NODE_SLOT)
                traps.append(ti)
                slots.append(s)
        self._segment_node = {}
        for sid in self.segment_ids:
            self._segment_node[sid] = len(names)
            names.append(sid)
            kinds.append(NODE_SEGMENT)
            traps.append(-1)
            slots.append(-1)
        self.node_names = names
        self.node_kind = np.array(kinds, dtype=np.int8)
        self.node_trap = np.array(traps, dtype=np.int32)
        self.node_slot = np.array(slots, dtype=np.int32)
        self.num_nodes = len(names)
        self._name_index = {n: i for i, n in enumerate(names)}

        swap_pairs = []
        for ti, tid in enumerate(self.trap_ids):
            base = int(self.trap_slot_offset[ti])
            for s in range(by_id[tid].capacity - 1):
                swap_pairs.append((base + s, base + s + 1))

        ms_pairs = []
        seen_ms = set()
        self.trap_attached_ends = [[] for _ in self.trap_ids]
        for ti, tid in enumerate(self.trap_ids):
            trap = by_id[tid]
            base = int(self.trap_slot_offset[ti])
            end_slots = (base, base + trap.capacity - 1)
            for e, seg in enumerate(trap.ends):
                if seg is None:
                    continue
                pair = (end_slots[e], self._segment_node[seg])
                if pair not in seen_ms:
                    seen_ms.add(pair)
                    ms_pairs.append(pair)
                    self.trap_attached_ends[ti].append(pair)

        move_pairs = []
        self.move_edge_junction = {}
        for j in sorted(spec.junctions, key=lambda j: j.id):
            segs = sorted(self._segment_node[s] for s in j.segments)
            for a in range(len(segs)):
                for b in range(a + 1, len(segs)):
                    key = (segs[a], segs[b])
                    if key not in self.move_edge_junction:
                        self.move_edge_junction[key] = j.id
                        move_pairs.append(key)

        def pair_array(pairs):
            if not pairs:
                return np.empty((0, 2), dtype=np.int32)
            return np.array(pairs, dtype=np.int32)

        self.swap_pairs = pair_array(swap_pairs)
        self.ms_pairs = pair_array(ms_pairs)
        self.move_pairs = pair_array(move_pairs)

        nbrs = [[] for _ in range(self.num_nodes)]
        for (u, v) in swap_pairs:
            nbrs[u].append((v, SWAP))
            nbrs[v].append((u, SWAP))
        for (u, v) in ms_pairs:
            nbrs[u].append((v, MERGE_SPLIT))
            nbrs[v].append((u, MERGE_SPLIT))
        for (u, v) in move_pairs:
            nbrs[u].append((v, MOVE))
            nbrs[v].append((u, MOVE))
        self.neighbors = [tuple(sorted(ns)) for ns in nbrs]
        self._edge_label = {}
        for u, ns in enumerate(self.neighbors):
            for v, label in ns:
                self._edge_label[(u, v)] = label

        exec_slots = []
        for ti in range(len(self.trap_ids)):
            if self.trap_executable[ti]:
                base = int(self.trap_slot_offset[ti])
                exec_slots.extend(range(base, base + int(self.trap_capacity[ti])))
        self.exec_slot_nodes = np.array(exec_slots, dtype=np.int32)
        self.segment_nodes = np.array(
            sorted(self._segment_node.values()), dtype=np.int32)

    # -- lookups -----------------------------------------------------------

    def slot_node(self, trap_id: str, slot: int) -> int:
        ti = self._trap_index[trap_id]
        if not 0 <= slot < int(self.trap_capacity[ti]):
            raise KeyError(f"trap {trap_id!r} has no slot {slot}")
        return int(self.trap_slot_offset[ti]) + slot

    def segment_node(self, segment_id: str) -> int:
        return self._segment_node[segment_id]

    def node_index(self, name: str) -> int:
        return self._name_index[name]

    def trap_index(self, trap_id: str) -> int:
        return self._trap_index[trap_id]

    def trap_slots(self, trap_index: int) -> range:
        base = int(self.trap_slot_offset[trap_index])
        return range(base, base + int(self.trap_capacity[trap_index]))

    def is_segment(self, node: int) -> bool:
        return self.node_kind[node] == NODE_SEGMENT

    def edge_label(self, u: int, v: int):
        return self._edge_label.get((u, v))

    @property
    def edges(self):
        """All (u, v, label) triples, construction order."""
        out = []
        for u, v in self.swap_pairs:
            out.append((int(u), int(v), SWAP))
        for u, v in self.ms_pairs:
            out.append((int(u), int(v), MERGE_SPLIT))
        for u, v in self.move_pairs:
            out.append((int(u), int(v), MOVE))
        return out

    @property
    def num_edges(self) -> int:
        return len(self.swap_pairs) + len(self.ms_pairs) + len(self.move_pairs)

    def junction_of(self, u: int, v: int):
        """Junction transited by the move edge (u, v), if it is one."""
        return self.move_edge_junction.get((min(u, v), max(u, v)))


def build_position_graph(spec: ArchitectureSpec) -> PositionGraph:
    """Construct the position graph; deterministic for a given spec."""
    return PositionGraph(spec)


@dataclass
class DistanceMatrix:
    """Dense minimal shuttle durations between positions (microseconds)."""

    matrix: np.ndarray
    timing: TimingModel

    def __getitem__(self, key):
        return self.matrix[key]


def all_pairs_shuttle_cost(g: PositionGraph, timing: TimingModel) -> DistanceMatrix:
    """Matrix of cheapest-duration paths between all node pairs."""
    n = g.num_nodes
    w = np.full((n, n), math.inf, dtype=np.float64)
    np.fill_diagonal(w, 0.0)
    for u, v, label in g.edges:
        c = timing.edge_weight(label)
        if c < w[u, v]:
            w[u, v] = c
            w[v, u] = c
    _kernels.floyd_warshall(w)
    return DistanceMatrix(w, timing)


def nearest_free_trap_distance(p: int, phi, g: PositionGraph,
                               dist: DistanceMatrix) -> float:
    """Shuttle cost from node p to the closest free executable-trap slot.

    Infinite when every executable trap is full.
    """
    return _kernels.free_slot_distance(dist.matrix, p, g.exec_slot_nodes,
                                       phi.occupancy)

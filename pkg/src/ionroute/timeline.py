"""Timed parallel schedules, constraint validation, and metrics.

Instructions are never reordered: the instruction list fixes the relative
order of any two operations sharing a resource, and the schedule only starts
an operation earlier when every resource it touches (nodes, qubits, the
junction of a move, the trap of an execution) is free.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .arch import (ArchitectureSpec, PositionGraph, TimingModel,
                   build_position_graph)
from .errors import IllegalMoveError, TraceFormatError
from .scheduler import ExecuteBlock, fold_permutation
from .state import INNER_SWAP, IonAssignment, Move, apply_move, executable_trap

TRACE_SCHEMA = "ionroute-trace-v1"
STATS_SCHEMA = "ionroute-stats-v1"

EXECUTE = "execute"
SHUTTLE_KINDS = ("inner_swap", "merge", "move", "shift", "split")
TRANSPORT_KINDS = ("split", "move", "merge")


@dataclass(frozen=True)
class Event:
    index: int
    kind: str
    qubits: tuple
    start: float
    end: float
    src: int = -1
    dst: int = -1
    block: int = -1
    trap: str = ""
    perm: tuple = ()
    n_1q: int = 0
    n_2q: int = 0

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass
class TimedSchedule:
    events: list
    makespan: float
    timing: TimingModel


@dataclass(frozen=True)
class Violation:
    constraint: object  # 1..8 or None for structural problems
    time: float
    message: str

    def __str__(self):
        tag = f"constraint {self.constraint}" if self.constraint else "check"
        return f"[t={self.time:.1f}] {tag}: {self.message}"


def _instruction_duration(ins, timing: TimingModel) -> float:
    if isinstance(ins, ExecuteBlock):
        return ins.n_1q * timing.gate_1q + ins.n_2q * timing.gate_2q
    if ins.kind == "split":
        return timing.split
    if ins.kind == "merge":
        return timing.merge
    if ins.kind == "move":
        return timing.move
    return timing.inner_swap  # inner_swap and shift


def _resources(ins, g: PositionGraph):
    if isinstance(ins, ExecuteBlock):
        res = [("t", ins.trap)]
        res.extend(("q", q) for q in ins.qubits)
        return res
    res = [("n", ins.src), ("n", ins.dst), ("q", ins.qubit)]
    if ins.kind == INNER_SWAP:
        res.append(("q", ins.qubit2))
    if ins.kind == "move":
        j = g.junction_of(ins.src, ins.dst)
        if j is not None:
            res.append(("j", j))
    return res


def schedule(instrs, phi0: IonAssignment, g: PositionGraph,
             timing: TimingModel) -> TimedSchedule:
    """Greedy list schedule of an instruction list.

    Refuses (with the failing index) when the instructions do not replay.
    """
    phi = phi0
    for i, ins in enumerate(instrs):
        try:
            if isinstance(ins, ExecuteBlock):
                trap = executable_trap(phi, ins.qubits, g)
                if trap != ins.trap:
                    raise IllegalMoveError(
                        f"block {ins.block} is not co-located in {ins.trap!r}")
                phi = fold_permutation(phi, ins.qubits, ins.perm)
            else:
                phi = apply_move(phi, ins, g)
        except IllegalMoveError as exc:
            raise IllegalMoveError(
                f"instruction {i} does not replay: {exc}") from exc

    avail = {}
    events = []
    makespan = 0.0
    for i, ins in enumerate(instrs):
        res = _resources(ins, g)
        start = max((avail.get(r, 0.0) for r in res), default=0.0)
        end = start + _instruction_duration(ins, timing)
        for r in res:
            avail[r] = end
        if end > makespan:
            makespan = end
        if isinstance(ins, ExecuteBlock):
            events.append(Event(i, EXECUTE, ins.qubits, start, end,
                                block=ins.block, trap=ins.trap, perm=ins.perm,
                                n_1q=ins.n_1q, n_2q=ins.n_2q))
        else:
            qubits = (ins.qubit, ins.qubit2) if ins.kind == INNER_SWAP \
                else (ins.qubit,)
            events.append(Event(i, ins.kind, qubits, start, end,
                                src=ins.src, dst=ins.dst))
    return TimedSchedule(events, makespan, timing)


# -- validation ---------------------------------------------------------------

def _event_instruction(ev: Event):
    if ev.kind == EXECUTE:
        return ExecuteBlock(ev.block, ev.trap, ev.perm, ev.qubits,
                            ev.n_1q, ev.n_2q)
    q2 = ev.qubits[1] if ev.kind == INNER_SWAP else -1
    return Move(ev.kind, ev.src, ev.dst, ev.qubits[0], q2)


def _overlap(a0, a1, b0, b1) -> bool:
    return a0 < b1 and b0 < a1


def validate(ts: TimedSchedule, phi0: IonAssignment, g: PositionGraph,
             arch: ArchitectureSpec = None) -> list:
    """Discrete-event replay of a timed schedule against all hardware rules.

    Returns a list of Violations; empty means the schedule is sound.
    """
    out = []
    timing = ts.timing
    events = sorted(ts.events, key=lambda e: e.index)

    # Durations must match the timing model.
    for ev in events:
        want = _instruction_duration(_event_instruction(ev), timing)
        if abs(ev.duration - want) > 1e-9:
            out.append(Violation(None, ev.start,
                                 f"event {ev.index} duration {ev.duration} "
                                 f"!= {want} for kind {ev.kind!r}"))

    # Structural replay in instruction order: occupancy, split/merge/move
    # legality (rules 1, 3, 4, 5, 6) and block co-location.
    phi = phi0
    replay_ok = True
    for ev in events:
        try:
            ins = _event_instruction(ev)
            if isinstance(ins, ExecuteBlock):
                trap = executable_trap(phi, ins.qubits, g)
                if trap != ins.trap:
                    raise IllegalMoveError(
                        f"block {ins.block} is not co-located in {ins.trap!r}")
                phi = fold_permutation(phi, ins.qubits, ins.perm)
            else:
                phi = apply_move(phi, ins, g)
        except IllegalMoveError as exc:
            out.append(Violation(exc.constraint, ev.start,
                                 f"event {ev.index}: {exc}"))
            replay_ok = False
            break

    # Per-qubit chains: non-overlapping, ordered like the instruction list.
    per_qubit = {}
    for ev in events:
        for q in ev.qubits:
            per_qubit.setdefault(q, []).append(ev)
    for q, evs in sorted(per_qubit.items()):
        for a, b in zip(evs, evs[1:]):
            if b.start < a.end - 1e-9:
                out.append(Violation(7, b.start,
                                     f"qubit {q} is busy in events "
                                     f"{a.index} and {b.index} at once"))

    # Node-level collision of shuttle events (rule 7) and junction
    # exclusivity (rule 2) and per-trap gate serialization (rule 8).
    node_holds = {}
    junction_holds = {}
    trap_holds = {}
    for ev in events:
        if ev.kind == EXECUTE:
            trap_holds.setdefault(ev.trap, []).append(ev)
            continue
        for n in (ev.src, ev.dst):
            node_holds.setdefault(n, []).append(ev)
        if ev.kind == "move":
            j = g.junction_of(ev.src, ev.dst)
            if j is None:
                out.append(Violation(6, ev.start,
                                     f"event {ev.index} moves across "
                                     f"non-junction nodes"))
            else:
                junction_holds.setdefault(j, []).append(ev)
    for n, evs in sorted(node_holds.items()):
        for i in range(len(evs)):
            for j in range(i + 1, len(evs)):
                a, b = evs[i], evs[j]
                if _overlap(a.start, a.end, b.start, b.end):
                    kind = 1 if g.is_segment(n) else 3
                    out.append(Violation(kind, max(a.start, b.start),
                                         f"events {a.index} and {b.index} "
                                         f"hold node {g.node_names[n]} "
                                         f"at the same time"))
    for jid, evs in sorted(junction_holds.items()):
        for i in range(len(evs)):
            for j in range(i + 1, len(evs)):
                a, b = evs[i], evs[j]
                if _overlap(a.start, a.end, b.start, b.end):
                    out.append(Violation(2, max(a.start, b.start),
                                         f"events {a.index} and {b.index} "
                                         f"transit junction {jid} at once"))
    for tid, evs in sorted(trap_holds.items()):
        for i in range(len(evs)):
            for j in range(i + 1, len(evs)):
                a, b = evs[i], evs[j]
                if _overlap(a.start, a.end, b.start, b.end):
                    out.append(Violation(8, max(a.start, b.start),
                                         f"blocks {a.block} and {b.block} "
                                         f"run in trap {tid} at once"))

    # Ion occupancy over time: between its events an ion owns its node, and
    # during an event it owns both endpoints. Two ions on one node is a
    # segment (1) or capacity (3) violation.
    if replay_ok:
        intervals = {}

        def occupy(node, q, t0, t1):
            intervals.setdefault(node, []).append((t0, t1, q))

        current = {q: (int(phi0.positions[q]), 0.0)
                   for q in range(phi0.num_qubits)}
        for ev in events:
            if ev.kind == EXECUTE:
                # A non-identity permutation relabels the block's ions in
                # place: close each moved label's interval and reopen it on
                # its new node at the same instant (nothing moves physically).
                olds = [current[q] for q in ev.qubits]
                for i, q in enumerate(ev.qubits):
                    if ev.perm[i] == i:
                        continue
                    node_old, since_old = olds[i]
                    occupy(node_old, q, since_old, ev.start)
                    current[q] = (olds[ev.perm[i]][0], ev.start)
                continue
            movers = [(ev.qubits[0], ev.src, ev.dst)]
            if ev.kind == INNER_SWAP:
                movers.append((ev.qubits[1], ev.dst, ev.src))
            for q, src, dst in movers:
                node, since = current[q]
                occupy(node, q, since, ev.end)
                # Swapping ions trade nodes at the end instant; a one-way
                # step claims its empty target for the whole event.
                arrive = ev.end if ev.kind == INNER_SWAP else ev.start
                current[q] = (dst, arrive)
        horizon = max(ts.makespan, 0.0)
        for q, (node, since) in sorted(current.items()):
            occupy(node, q, since, horizon)
        for node, ivs in sorted(intervals.items()):
            ivs.sort()
            for i in range(len(ivs)):
                for j in range(i + 1, len(ivs)):
                    a, b = ivs[i], ivs[j]
                    if b[0] >= a[1]:
                        break
                    if a[2] != b[2] and _overlap(a[0], a[1], b[0], b[1]):
                        kind = 1 if g.is_segment(node) else 3
                        out.append(Violation(
                            kind, max(a[0], b[0]),
                            f"ions {a[2]} and {b[2]} share node "
                            f"{g.node_names[node]}"))
    return out


# -- metrics --------------------------------------------------------------------

@dataclass
class ScheduleStats:
    makespan_us: float
    shuttle_makespan_us: float
    shuttle_duration_us: float
    transport_duration_us: float
    gate_duration_us: float
    sp: float
    gate_parallelism: float
    counts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "schema": STATS_SCHEMA,
            "makespan_us": self.makespan_us,
            "shuttle_makespan_us": self.shuttle_makespan_us,
            "shuttle_duration_us": self.shuttle_duration_us,
            "transport_duration_us": self.transport_duration_us,
            "gate_duration_us": self.gate_duration_us,
            "sp": self.sp,
            "gate_parallelism": self.gate_parallelism,
        }
        for kind in (*SHUTTLE_KINDS, EXECUTE):
            d[f"count_{kind}"] = self.counts.get(kind, 0)
        return d


def _union_length(intervals) -> float:
    total = 0.0
    end = -1.0
    for s, e in sorted(intervals):
        if s > end:
            total += e - s
            end = e
        elif e > end:
            total += e - end
            end = e
    return total


def stats(ts: TimedSchedule) -> ScheduleStats:
    """Metrics of a validated schedule.

    ``sp`` is the share of split+move+merge time within all shuttle time.
    """
    counts = {}
    shuttle_dur = 0.0
    transport_dur = 0.0
    gate_dur = 0.0
    shuttle_end = 0.0
    gate_intervals = []
    for ev in ts.events:
        counts[ev.kind] = counts.get(ev.kind, 0) + 1
        if ev.kind == EXECUTE:
            gate_dur += ev.duration
            gate_intervals.append((ev.start, ev.end))
        else:
            shuttle_dur += ev.duration
            if ev.end > shuttle_end:
                shuttle_end = ev.end
            if ev.kind in TRANSPORT_KINDS:
                transport_dur += ev.duration
    sp = transport_dur / shuttle_dur if shuttle_dur > 0 else 0.0
    union = _union_length(gate_intervals)
    parallelism = gate_dur / union if union > 0 else 0.0
    return ScheduleStats(ts.makespan, shuttle_end, shuttle_dur, transport_dur,
                         gate_dur, sp, parallelism, counts)


# -- trace serialization ----------------------------------------------------------

def trace_document(ts: TimedSchedule, *, spec: ArchitectureSpec,
                   g: PositionGraph, phi0: IonAssignment, k: int, algo: str,
                   seed: int, config: dict) -> dict:
    events = []
    for ev in sorted(ts.events, key=lambda e: e.index):
        rec = {
            "i": ev.index,
            "kind": ev.kind,
            "qubits": list(ev.qubits),
            "t_start": ev.start,
            "t_end": ev.end,
        }
        if ev.kind == EXECUTE:
            rec.update(block=ev.block, trap=ev.trap, perm=list(ev.perm),
                       n_1q=ev.n_1q, n_2q=ev.n_2q)
        else:
            rec.update({"from": g.node_names[ev.src],
                        "to": g.node_names[ev.dst]})
        events.append(rec)
    return {
        "schema": TRACE_SCHEMA,
        "arch": spec.to_dict(),
        "timing": ts.timing.to_dict(),
        "k": k,
        "algo": algo,
        "seed": seed,
        "config": config,
        "num_qubits": phi0.num_qubits,
        "initial_assignment": {str(q): g.node_names[phi0.position(q)]
                               for q in range(phi0.num_qubits)},
        "events": events,
        "makespan": ts.makespan,
    }


def dump_trace(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def load_trace(doc: dict):
    """Rebuild (spec, graph, timing, phi0, schedule, k) from a trace document."""
    if not isinstance(doc, dict) or doc.get("schema") != TRACE_SCHEMA:
        raise TraceFormatError(f"expected schema {TRACE_SCHEMA!r}")
    try:
        spec = ArchitectureSpec.from_dict(doc["arch"])
        g = build_position_graph(spec)
        timing = TimingModel.from_dict(doc["timing"])
        num_qubits = int(doc["num_qubits"])
        mapping = {int(q): g.node_index(name)
                   for q, name in doc["initial_assignment"].items()}
        phi0 = IonAssignment.from_mapping(mapping, g.num_nodes)
        events = []
        for rec in doc["events"]:
            kind = rec["kind"]
            if kind == EXECUTE:
                ev = Event(int(rec["i"]), kind, tuple(rec["qubits"]),
                           float(rec["t_start"]), float(rec["t_end"]),
                           block=int(rec["block"]), trap=rec["trap"],
                           perm=tuple(rec["perm"]), n_1q=int(rec["n_1q"]),
                           n_2q=int(rec["n_2q"]))
            elif kind in SHUTTLE_KINDS:
                ev = Event(int(rec["i"]), kind, tuple(rec["qubits"]),
                           float(rec["t_start"]), float(rec["t_end"]),
                           src=g.node_index(rec["from"]),
                           dst=g.node_index(rec["to"]))
            else:
                raise TraceFormatError(f"unknown event kind {kind!r}")
            events.append(ev)
        makespan = float(doc["makespan"])
    except TraceFormatError:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise TraceFormatError(f"malformed trace: {exc}") from exc
    if num_qubits != phi0.num_qubits:
        raise TraceFormatError("initial assignment does not cover all qubits")
    ts = TimedSchedule(events, makespan, timing)
    return spec, g, timing, phi0, ts, int(doc.get("k", 0))

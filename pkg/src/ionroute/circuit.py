"""Circuits, block partitioning, and the front-layer view used by routing."""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass

from .errors import IonRouteError

# name -> (qubit arity, parameter count)
_GATES = {
    "u1": (1, 1), "u2": (1, 2), "u3": (1, 3),
    "rz": (1, 1), "rx": (1, 1), "ry": (1, 1),
    "h": (1, 0), "x": (1, 0), "y": (1, 0), "z": (1, 0), "sx": (1, 0),
    "t": (1, 0), "tdg": (1, 0), "s": (1, 0), "sdg": (1, 0),
    "cx": (2, 0), "cz": (2, 0), "rzz": (2, 1), "swap": (2, 0),
}
GATE_QUBITS = {name: a for name, (a, _) in _GATES.items()}
GATE_PARAMS = {name: p for name, (_, p) in _GATES.items()}


@dataclass(frozen=True)
class Gate:
    name: str
    params: tuple
    qubits: tuple

    def __post_init__(self):
        if self.name not in GATE_QUBITS:
            raise ValueError(f"unknown gate {self.name!r}")
        if len(self.qubits) != GATE_QUBITS[self.name]:
            raise ValueError(f"gate {self.name!r} takes "
                             f"{GATE_QUBITS[self.name]} qubit(s)")
        if len(self.qubits) == 2 and self.qubits[0] == self.qubits[1]:
            raise ValueError(f"gate {self.name!r} needs distinct qubits")


class Circuit:
    """A qubit count plus an ordered gate list."""

    def __init__(self, num_qubits: int, gates=()):
        self.num_qubits = num_qubits
        self.gates = list(gates)
        for g in self.gates:
            for q in g.qubits:
                if not 0 <= q < num_qubits:
                    raise ValueError(f"gate {g.name!r} operand {q} out of range")

    def add(self, name, qubits, params=()):
        self.gates.append(Gate(name, tuple(float(p) for p in params),
                               tuple(qubits)))

    @property
    def two_qubit_gate_count(self) -> int:
        return sum(1 for g in self.gates if len(g.qubits) == 2)

    def __eq__(self, other):
        return (isinstance(other, Circuit)
                and self.num_qubits == other.num_qubits
                and self.gates == other.gates)

    def __repr__(self):
        return f"Circuit({self.num_qubits} qubits, {len(self.gates)} gates)"


# -- generators -------------------------------------------------------------

def _qft(n: int) -> Circuit:
    c = Circuit(n)
    for i in range(n):
        c.add("h", (i,))
        for j in range(i + 1, n):
            lam = math.pi / (2 ** (j - i))
            # controlled-phase as u1-conjugated cx
            c.add("u1", (j,), (lam / 2,))
            c.add("cx", (j, i))
            c.add("u1", (i,), (-lam / 2,))
            c.add("cx", (j, i))
            c.add("u1", (i,), (lam / 2,))
    for i in range(n // 2):
        a, b = i, n - 1 - i
        c.add("cx", (a, b))
        c.add("cx", (b, a))
        c.add("cx", (a, b))
    return c


def _qaoa_er(n: int, seed: int, layers: int) -> Circuit:
    rng = random.Random(seed)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)
             if rng.random() < 0.3]
    c = Circuit(n)
    for q in range(n):
        c.add("h", (q,))
    for _ in range(layers):
        gamma = rng.uniform(0.0, 2.0 * math.pi)
        beta = rng.uniform(0.0, math.pi)
        for (i, j) in edges:
            c.add("rzz", (i, j), (gamma,))
        for q in range(n):
            c.add("rx", (q,), (2.0 * beta,))
    return c


def _qv_like(n: int, seed: int, depth: int) -> Circuit:
    rng = random.Random(seed)
    c = Circuit(n)

    def u3(q):
        c.add("u3", (q,), (rng.uniform(0, 2 * math.pi),
                           rng.uniform(0, 2 * math.pi),
                           rng.uniform(0, 2 * math.pi)))

    for _ in range(depth):
        order = list(range(n))
        rng.shuffle(order)
        for k in range(0, n - 1, 2):
            a, b = order[k], order[k + 1]
            u3(a)
            u3(b)
            c.add("cx", (a, b))
            u3(a)
            u3(b)
            c.add("cx", (b, a))
            u3(a)
            u3(b)
            c.add("cx", (a, b))
    return c


def generate(kind: str, n: int, seed: int = 0, *, layers: int = 1,
             depth=None) -> Circuit:
    """Seeded benchmark circuits: qft, qaoa_er, qv_like."""
    if n < 2:
        raise ValueError("circuit generators need n >= 2")
    if kind == "qft":
        return _qft(n)
    if kind == "qaoa_er":
        return _qaoa_er(n, seed, layers)
    if kind == "qv_like":
        return _qv_like(n, seed, n if depth is None else depth)
    raise ValueError(f"unknown circuit kind {kind!r}")


# -- block partition ---------------------------------------------------------

@dataclass(frozen=True)
class Block:
    id: int
    qubits: tuple          # sorted logical qubits
    gates: tuple           # indices into the circuit gate list
    n_1q: int
    n_2q: int

    @property
    def width(self) -> int:
        return len(self.qubits)

    @property
    def two_qubit_gate_count(self) -> int:
        return self.n_2q


class BlockDag:
    """Circuit split into width-limited blocks with shared-qubit ordering."""

    def __init__(self, blocks, succ, pred, num_qubits, k):
        self.blocks = blocks
        self.succ = succ
        self.pred = pred
        self.num_qubits = num_qubits
        self.k = k

    def __len__(self):
        return len(self.blocks)

    def reversed(self) -> "BlockDag":
        """Same blocks with all dependencies flipped."""
        return BlockDag(self.blocks, self.pred, self.succ,
                        self.num_qubits, self.k)

    def max_width(self) -> int:
        return max((b.width for b in self.blocks), default=0)

    def to_debug_text(self) -> str:
        lines = []
        for b in self.blocks:
            lines.append(f"block {b.id}: qubits={list(b.qubits)} "
                         f"gates={len(b.gates)} 2q={b.n_2q} "
                         f"succ={self.succ[b.id]}")
        return "\n".join(lines) + "\n"


def partition_blocks(circuit: Circuit, k: int) -> BlockDag:
    """Greedy left-to-right scan into blocks touching at most k qubits.

    A two-qubit gate joins the newest compatible open block; a block closes
    once any of its qubits shows up in a newer block. Single-qubit gates
    follow their qubit's current block and never widen one.
    """
    if k < 2:
        raise IonRouteError("block width k must be >= 2")

    qubit_sets = []        # per block, set of qubits
    gate_lists = []        # per block, gate indices
    last_block = {}        # qubit -> newest block holding it
    frozen = set()

    def join(bidx, gi, qubits):
        gate_lists[bidx].append(gi)
        for q in qubits:
            prev = last_block.get(q)
            if prev is not None and prev != bidx:
                frozen.add(prev)
            qubit_sets[bidx].add(q)
            last_block[q] = bidx

    def open_block(gi, qubits):
        qubit_sets.append(set())
        gate_lists.append([])
        join(len(qubit_sets) - 1, gi, qubits)

    for gi, gate in enumerate(circuit.gates):
        qs = gate.qubits
        if len(qs) == 1:
            b = last_block.get(qs[0])
            if b is not None and b not in frozen:
                join(b, gi, qs)
            else:
                open_block(gi, qs)
            continue
        # Joining a block older than an operand's newest block would break
        # per-qubit gate ordering, so the scan stops at that bound.
        bound = max((last_block.get(q, -1) for q in qs), default=-1)
        chosen = None
        for b in range(len(qubit_sets) - 1, max(bound, 0) - 1, -1):
            if b in frozen:
                continue
            if len(qubit_sets[b] | set(qs)) <= k:
                chosen = b
                break
        if chosen is not None:
            join(chosen, gi, qs)
        else:
            open_block(gi, qs)

    blocks = []
    for bid, (qset, gidx) in enumerate(zip(qubit_sets, gate_lists)):
        n2 = sum(1 for gi in gidx if len(circuit.gates[gi].qubits) == 2)
        blocks.append(Block(bid, tuple(sorted(qset)), tuple(gidx),
                            len(gidx) - n2, n2))

    edges = set()
    chains = {}
    for b in blocks:
        for q in b.qubits:
            prev = chains.get(q)
            if prev is not None:
                edges.add((prev, b.id))
            chains[q] = b.id
    succ = [[] for _ in blocks]
    pred = [[] for _ in blocks]
    for a, b in sorted(edges):
        succ[a].append(b)
        pred[b].append(a)
    return BlockDag(blocks, succ, pred, circuit.num_qubits, k)


# -- front layer and lookahead ------------------------------------------------

@dataclass(frozen=True)
class FrontState:
    """Progress through a BlockDag: executed set, front layer, lookahead."""

    executed: frozenset
    front: tuple
    extended: tuple
    lookahead: int


def _extended_set(dag: BlockDag, executed, front, lookahead) -> tuple:
    # Breadth-first over successor edges from the front, capped at
    # `lookahead` blocks.
    out = []
    seen = set(front) | executed
    queue = deque(front)
    while queue and len(out) < lookahead:
        b = queue.popleft()
        for nb in dag.succ[b]:
            if nb in seen:
                continue
            seen.add(nb)
            out.append(nb)
            queue.append(nb)
            if len(out) >= lookahead:
                break
    return tuple(out)


def initial_front(dag: BlockDag, lookahead: int) -> FrontState:
    front = tuple(b.id for b in dag.blocks if not dag.pred[b.id])
    executed = frozenset()
    return FrontState(executed, front, _extended_set(dag, executed, front,
                                                     lookahead), lookahead)


def advance(fs: FrontState, dag: BlockDag, executed_block: int) -> FrontState:
    """Mark a front block executed and refresh front/extended sets."""
    if executed_block not in fs.front:
        raise ValueError(f"block {executed_block} is not in the front layer")
    executed = fs.executed | {executed_block}
    front = [b for b in fs.front if b != executed_block]
    for nb in dag.succ[executed_block]:
        if all(p in executed for p in dag.pred[nb]):
            front.append(nb)
    front = tuple(sorted(front))
    return FrontState(executed, front,
                      _extended_set(dag, executed, front, fs.lookahead),
                      fs.lookahead)

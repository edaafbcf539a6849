"""Ion assignment on the position graph, legal moves, and block executability."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .arch import MERGE_SPLIT, MOVE, NODE_SEGMENT, NODE_SLOT, SWAP, PositionGraph
from .errors import IllegalMoveError

INNER_SWAP = "inner_swap"
MERGE = "merge"
MOVE_KIND = "move"
SHIFT = "shift"
SPLIT = "split"

# Kind names indexed by kernel kind code (codes follow name sort order).
KIND_NAMES = (INNER_SWAP, MERGE, MOVE_KIND, SHIFT, SPLIT)
KIND_CODES = {name: i for i, name in enumerate(KIND_NAMES)}


@dataclass(frozen=True)
class Move:
    """One shuttle primitive: an ion steps across a single edge.

    ``qubit`` rides from src to dst; ``qubit2`` is the partner ion for
    inner_swap (which exchanges the two).
    """

    kind: str
    src: int
    dst: int
    qubit: int
    qubit2: int = -1

    def sort_key(self):
        return (self.kind, self.src, self.dst)


class IonAssignment:
    """Injective map from logical qubits to occupied position-graph nodes."""

    __slots__ = ("_pos", "_occ")

    def __init__(self, positions, num_nodes: int):
        pos = np.asarray(positions, dtype=np.int32)
        occ = np.full(num_nodes, -1, dtype=np.int32)
        for q, n in enumerate(pos):
            if not 0 <= n < num_nodes:
                raise ValueError(f"qubit {q} placed on invalid node {n}")
            if occ[n] >= 0:
                raise ValueError(f"qubits {occ[n]} and {q} share node {n}")
            occ[n] = q
        self._pos = pos
        self._occ = occ

    @classmethod
    def from_mapping(cls, mapping: dict, num_nodes: int) -> "IonAssignment":
        pos = [mapping[q] for q in range(len(mapping))]
        return cls(pos, num_nodes)

    @classmethod
    def _raw(cls, pos, occ):
        phi = cls.__new__(cls)
        phi._pos = pos
        phi._occ = occ
        return phi

    @property
    def positions(self) -> np.ndarray:
        return self._pos

    @property
    def occupancy(self) -> np.ndarray:
        return self._occ

    @property
    def num_qubits(self) -> int:
        return len(self._pos)

    def position(self, qubit: int) -> int:
        return int(self._pos[qubit])

    def occupant(self, node: int):
        q = self._occ[node]
        return int(q) if q >= 0 else None

    def is_occupied(self, node: int) -> bool:
        return self._occ[node] >= 0

    def copy(self) -> "IonAssignment":
        return IonAssignment._raw(self._pos.copy(), self._occ.copy())

    def key(self) -> bytes:
        return self._pos.tobytes()

    def to_mapping(self) -> dict:
        return {q: int(n) for q, n in enumerate(self._pos)}

    def to_debug_text(self, g: PositionGraph) -> str:
        pairs = [f"q{q} -> {g.node_names[n]}" for q, n in enumerate(self._pos)]
        return "\n".join(pairs) + "\n"

    def __eq__(self, other):
        return (isinstance(other, IonAssignment)
                and np.array_equal(self._pos, other._pos))

    def __repr__(self):
        return f"IonAssignment({list(map(int, self._pos))})"


def legal_moves(phi: IonAssignment, g: PositionGraph) -> list:
    """Every legal single-step move, sorted by (kind, src, dst)."""
    kinds, srcs, dsts = _kernels.enumerate_moves(
        phi.occupancy, g.swap_pairs, g.ms_pairs, g.move_pairs)
    occ = phi.occupancy
    out = []
    for k, s, d in zip(kinds, srcs, dsts):
        name = KIND_NAMES[k]
        q2 = int(occ[d]) if name == INNER_SWAP else -1
        out.append(Move(name, int(s), int(d), int(occ[s]), q2))
    return out


def _check_move(phi: IonAssignment, m: Move, g: PositionGraph) -> None:
    label = g.edge_label(m.src, m.dst)
    if label is None:
        raise IllegalMoveError(f"nodes {m.src} and {m.dst} are not adjacent")
    if not phi.is_occupied(m.src) or phi.occupant(m.src) != m.qubit:
        raise IllegalMoveError(f"qubit {m.qubit} is not at node {m.src}")
    src_kind = g.node_kind[m.src]
    dst_kind = g.node_kind[m.dst]

    if m.kind == SPLIT:
        if label != MERGE_SPLIT or src_kind != NODE_SLOT:
            raise IllegalMoveError("split must take a trap end to a segment",
                                   constraint=4)
        if phi.is_occupied(m.dst):
            raise IllegalMoveError(f"segment node {m.dst} is occupied",
                                   constraint=1)
    elif m.kind == MERGE:
        if label != MERGE_SPLIT or src_kind != NODE_SEGMENT:
            raise IllegalMoveError("merge must take a segment to a trap end",
                                   constraint=5)
        if phi.is_occupied(m.dst):
            raise IllegalMoveError(f"trap slot {m.dst} is occupied",
                                   constraint=3)
    elif m.kind == MOVE_KIND:
        if label != MOVE or src_kind != NODE_SEGMENT or dst_kind != NODE_SEGMENT:
            raise IllegalMoveError("move must join two segments at a junction",
                                   constraint=6)
        if phi.is_occupied(m.dst):
            raise IllegalMoveError(f"segment node {m.dst} is occupied",
                                   constraint=1)
    elif m.kind == SHIFT:
        if label != SWAP:
            raise IllegalMoveError("shift must stay inside one trap")
        if phi.is_occupied(m.dst):
            raise IllegalMoveError(f"trap slot {m.dst} is occupied",
                                   constraint=3)
    elif m.kind == INNER_SWAP:
        if label != SWAP:
            raise IllegalMoveError("inner_swap must stay inside one trap")
        if not phi.is_occupied(m.dst) or phi.occupant(m.dst) != m.qubit2:
            raise IllegalMoveError(
                f"inner_swap expects qubit {m.qubit2} at node {m.dst}")
    else:
        raise IllegalMoveError(f"unknown move kind {m.kind!r}")


def apply_move(phi: IonAssignment, m: Move, g: PositionGraph) -> IonAssignment:
    """Return the assignment after one validated move."""
    _check_move(phi, m, g)
    out = phi.copy()
    pos = out._pos
    occ = out._occ
    if m.kind == INNER_SWAP:
        pos[m.qubit] = m.dst
        pos[m.qubit2] = m.src
        occ[m.src] = m.qubit2
        occ[m.dst] = m.qubit
    else:
        pos[m.qubit] = m.dst
        occ[m.src] = -1
        occ[m.dst] = m.qubit
    return out


def executable_trap(phi: IonAssignment, block, g: PositionGraph):
    """Trap id when all of a block's qubits sit in one executable trap."""
    qubits = getattr(block, "qubits", block)
    trap = -1
    for q in qubits:
        node = phi.position(q)
        if g.node_kind[node] != NODE_SLOT:
            return None
        t = int(g.node_trap[node])
        if trap == -1:
            trap = t
        elif t != trap:
            return None
    if trap == -1 or not g.trap_executable[trap]:
        return None
    return g.trap_ids[trap]

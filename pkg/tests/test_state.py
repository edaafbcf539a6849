import random

import pytest

from ionroute.arch import (ArchitectureSpec, JunctionSpec, SegmentSpec,
                           TrapSpec, build_position_graph, preset)
from ionroute.errors import IllegalMoveError
from ionroute.state import (IonAssignment, Move, apply_move, executable_trap,
                            legal_moves)

from generators import random_spec
from oracles import reachable_assignments, rule_based_moves


def mini_graph():
    return build_position_graph(preset("MINI", 2))


def mini_state(g, names):
    return IonAssignment([g.node_index(n) for n in names], g.num_nodes)


def as_triples(moves):
    return sorted((m.kind, m.src, m.dst) for m in moves)


def test_mini_example_has_exactly_four_moves():
    g = mini_graph()
    phi = mini_state(g, ["t1:0", "t1:1", "t2:0"])
    moves = as_triples(legal_moves(phi, g))
    want = sorted([
        ("inner_swap", g.node_index("t1:0"), g.node_index("t1:1")),
        ("split", g.node_index("t1:0"), g.node_index("s1")),
        ("split", g.node_index("t2:0"), g.node_index("s2")),
        ("shift", g.node_index("t2:0"), g.node_index("t2:1")),
    ])
    assert moves == want
    assert moves == rule_based_moves(phi, g)


def test_no_ions_means_no_moves():
    g = mini_graph()
    assert legal_moves(IonAssignment([], g.num_nodes), g) == []


def test_saturated_device_leaves_only_inner_swaps():
    g = mini_graph()
    phi = mini_state(g, ["t1:0", "t1:1", "t2:0", "t2:1", "s1", "s2"])
    moves = legal_moves(phi, g)
    assert {m.kind for m in moves} == {"inner_swap"}
    assert as_triples(moves) == rule_based_moves(phi, g)


def test_moves_are_sorted_and_match_rule_enumeration():
    rng = random.Random(21)
    for _ in range(80):
        spec = random_spec(rng)
        g = build_position_graph(spec)
        n_ions = rng.randint(0, g.num_nodes)
        nodes = rng.sample(range(g.num_nodes), n_ions)
        phi = IonAssignment(nodes, g.num_nodes)
        moves = legal_moves(phi, g)
        assert [m.sort_key() for m in moves] == sorted(
            m.sort_key() for m in moves)
        assert as_triples(moves) == rule_based_moves(phi, g)
        # closure: every enumerated move applies cleanly
        for m in moves:
            phi2 = apply_move(phi, m, g)
            assert phi2 is not phi


def test_split_then_merge_is_identity():
    g = mini_graph()
    phi = mini_state(g, ["t1:0"])
    split = Move("split", g.node_index("t1:0"), g.node_index("s1"), 0)
    merge = Move("merge", g.node_index("s1"), g.node_index("t1:0"), 0)
    assert apply_move(apply_move(phi, split, g), merge, g) == phi


def test_inner_swap_is_an_involution():
    g = mini_graph()
    phi = mini_state(g, ["t1:0", "t1:1"])
    swap = Move("inner_swap", g.node_index("t1:0"), g.node_index("t1:1"), 0, 1)
    once = apply_move(phi, swap, g)
    assert once != phi
    assert apply_move(once, swap.__class__("inner_swap", swap.src, swap.dst,
                                           1, 0), g) == phi


def test_random_walks_conserve_ions():
    rng = random.Random(22)
    for _ in range(20):
        spec = random_spec(rng)
        g = build_position_graph(spec)
        n_ions = rng.randint(1, max(1, g.num_nodes - 1))
        phi = IonAssignment(rng.sample(range(g.num_nodes), n_ions),
                            g.num_nodes)
        for _ in range(30):
            moves = legal_moves(phi, g)
            if not moves:
                break
            phi = apply_move(phi, moves[rng.randrange(len(moves))], g)
            occupied = [n for n in range(g.num_nodes) if phi.is_occupied(n)]
            assert len(occupied) == n_ions
            assert sorted(phi.position(q) for q in range(n_ions)) == occupied


def test_illegal_moves_cite_the_broken_rule():
    g = mini_graph()
    phi = mini_state(g, ["t1:0", "s1"])
    with pytest.raises(IllegalMoveError) as e:
        apply_move(phi, Move("split", g.node_index("t1:0"),
                             g.node_index("s1"), 0), g)
    assert e.value.constraint == 1  # segment already holds an ion
    phi = mini_state(g, ["s1", "t1:0"])
    with pytest.raises(IllegalMoveError) as e:
        apply_move(phi, Move("merge", g.node_index("s1"),
                             g.node_index("t1:0"), 0), g)
    assert e.value.constraint == 3  # trap slot occupied
    phi = mini_state(g, ["s1", "s2"])
    with pytest.raises(IllegalMoveError) as e:
        apply_move(phi, Move("move", g.node_index("s1"),
                             g.node_index("s2"), 0), g)
    assert e.value.constraint == 1
    # wrong shapes
    with pytest.raises(IllegalMoveError) as e:
        apply_move(mini_state(g, ["t1:0"]),
                   Move("move", g.node_index("t1:0"), g.node_index("s1"), 0), g)
    assert e.value.constraint == 6
    with pytest.raises(IllegalMoveError):
        apply_move(mini_state(g, ["t1:0"]),
                   Move("split", g.node_index("t1:0"), g.node_index("t1:1"),
                        0), g)
    with pytest.raises(IllegalMoveError, match="not adjacent"):
        apply_move(mini_state(g, ["t1:1"]),
                   Move("split", g.node_index("t1:1"), g.node_index("s2"), 0),
                   g)


def test_executable_trap_requires_co_location():
    g = mini_graph()
    assert executable_trap(mini_state(g, ["t1:0", "t1:1"]), (0, 1), g) == "t1"
    assert executable_trap(mini_state(g, ["t1:0", "t2:0"]), (0, 1), g) is None
    assert executable_trap(mini_state(g, ["s1", "s2"]), (0, 1), g) is None
    # width-1 block: wherever the ion is, if executable
    assert executable_trap(mini_state(g, ["t2:1"]), (0,), g) == "t2"
    assert executable_trap(mini_state(g, ["s1"]), (0,), g) is None


def test_executable_trap_excludes_storage():
    spec = ArchitectureSpec(
        [TrapSpec("t1", 2, "storage", ("s1", None)),
         TrapSpec("t2", 2, "executable", ("s2", None))],
        [JunctionSpec("j1", ("s1", "s2"))],
        [SegmentSpec("s1"), SegmentSpec("s2")])
    g = build_position_graph(spec)
    phi = IonAssignment([g.node_index("t1:0"), g.node_index("t1:1")],
                        g.num_nodes)
    assert executable_trap(phi, (0, 1), g) is None


def test_every_same_count_assignment_is_reachable_on_mini():
    g = mini_graph()
    expected = {1: 6, 2: 30, 3: 120}
    for n_ions, count in expected.items():
        phi0 = IonAssignment(list(range(n_ions)), g.num_nodes)
        reached = reachable_assignments(phi0, g)
        assert len(reached) == count


def test_assignment_validation():
    g = mini_graph()
    with pytest.raises(ValueError, match="share node"):
        IonAssignment([0, 0], g.num_nodes)
    with pytest.raises(ValueError, match="invalid node"):
        IonAssignment([99], g.num_nodes)

import math
import random

import numpy as np
import pytest

from ionroute.arch import (MERGE_SPLIT, MOVE, SWAP, ArchitectureSpec,
                           JunctionSpec, SegmentSpec, TimingModel, TrapSpec,
                           all_pairs_shuttle_cost, build_position_graph,
                           nearest_free_trap_distance, preset)
from ionroute.errors import ArchitectureError
from ionroute.state import IonAssignment

from generators import random_spec
from oracles import dijkstra_all_pairs


def label_counts(g):
    counts = {SWAP: 0, MERGE_SPLIT: 0, MOVE: 0}
    for _, _, label in g.edges:
        counts[label] += 1
    return counts


def test_h_preset_matches_published_size():
    g = build_position_graph(preset("H", 3))
    assert g.num_nodes == 17
    assert g.num_edges == 18
    assert label_counts(g) == {SWAP: 8, MOVE: 6, MERGE_SPLIT: 4}


def test_single_trap_degenerate_device():
    spec = ArchitectureSpec([TrapSpec("t1", 1)], [], [])
    g = build_position_graph(spec)
    assert g.num_nodes == 1
    assert g.num_edges == 0


def test_mini_is_the_expected_chain():
    g = build_position_graph(preset("MINI", 2))
    assert g.num_nodes == 6
    assert g.num_edges == 5
    chain = ["t1:1", "t1:0", "s1", "s2", "t2:0", "t2:1"]
    labels = [SWAP, MERGE_SPLIT, MOVE, MERGE_SPLIT, SWAP]
    edge_set = {(min(u, v), max(u, v)): l for u, v, l in g.edges}
    for (a, b), want in zip(zip(chain, chain[1:]), labels):
        u, v = g.node_index(a), g.node_index(b)
        assert edge_set[(min(u, v), max(u, v))] == want


def test_preset_node_counts_follow_slot_plus_segment_rule():
    assert build_position_graph(preset("G2x3", 3)).num_nodes == 6 * 3 + 8 == 26
    assert build_position_graph(preset("H", 5)).num_nodes == 4 * 5 + 5 == 25


def test_unknown_preset_and_bad_capacity():
    with pytest.raises(ArchitectureError):
        preset("X", 3)
    with pytest.raises(ArchitectureError):
        preset("H", 0)


def test_node_count_property_on_random_specs():
    rng = random.Random(7)
    for _ in range(200):
        spec = random_spec(rng)
        g = build_position_graph(spec)
        want = sum(t.capacity for t in spec.traps) + len(spec.segments)
        assert g.num_nodes == want


def test_junction_cliques_have_all_pairs():
    rng = random.Random(8)
    for _ in range(100):
        spec = random_spec(rng)
        g = build_position_graph(spec)
        move_edges = {(u, v) for u, v, l in g.edges if l == MOVE}
        for j in spec.junctions:
            nodes = sorted(g.segment_node(s) for s in j.segments)
            d = len(nodes)
            present = sum(1 for i in range(d) for k in range(i + 1, d)
                          if (nodes[i], nodes[k]) in move_edges)
            assert present == d * (d - 1) // 2


def test_construction_is_deterministic():
    spec = preset("G2x3", 4)
    g1 = build_position_graph(spec)
    g2 = build_position_graph(ArchitectureSpec.from_json(spec.to_json()))
    assert g1.node_names == g2.node_names
    assert g1.edges == g2.edges


def test_validation_rejects_malformed_specs():
    # dangling segment: only one endpoint
    spec = ArchitectureSpec([TrapSpec("t1", 2, ends=("s1", None))], [],
                            [SegmentSpec("s1")])
    with pytest.raises(ArchitectureError, match="endpoint"):
        spec.validate()
    # duplicate attachment at one junction
    spec = ArchitectureSpec(
        [TrapSpec("t1", 2, ends=("s1", None))],
        [JunctionSpec("j1", ("s1", "s1"))], [SegmentSpec("s1")])
    with pytest.raises(ArchitectureError, match="twice"):
        spec.validate()
    # junction degree below two
    spec = ArchitectureSpec(
        [TrapSpec("t1", 2, ends=("s1", None))],
        [JunctionSpec("j1", ("s1",))], [SegmentSpec("s1")])
    with pytest.raises(ArchitectureError, match="degree"):
        spec.validate()
    # no executable trap
    spec = ArchitectureSpec([TrapSpec("t1", 2, kind="storage")], [], [])
    with pytest.raises(ArchitectureError, match="executable"):
        spec.validate()
    # disconnected device
    spec = ArchitectureSpec([TrapSpec("t1", 2), TrapSpec("t2", 2)], [], [])
    with pytest.raises(ArchitectureError, match="connected"):
        spec.validate()
    # unknown segment reference
    spec = ArchitectureSpec([TrapSpec("t1", 2, ends=("nope", None))], [], [])
    with pytest.raises(ArchitectureError, match="unknown segment"):
        spec.validate()


def test_timing_model_validation_and_weights():
    with pytest.raises(ValueError):
        TimingModel(split=0.0)
    t = TimingModel(split=70, merge=90, move=100, inner_swap=120)
    assert t.edge_weight(SWAP) == 120
    assert t.edge_weight(MERGE_SPLIT) == 90  # conservative max(split, merge)
    assert t.edge_weight(MOVE) == 100
    assert TimingModel.from_dict(t.to_dict()) == t


def dyadic_timing(rng):
    def w():
        return rng.randrange(1, 2049) / 8.0
    return TimingModel(split=w(), merge=w(), move=w(), inner_swap=w(),
                       gate_1q=w(), gate_2q=w())


def test_distance_matrix_equals_dijkstra_exactly():
    rng = random.Random(11)
    for _ in range(40):
        spec = random_spec(rng)
        g = build_position_graph(spec)
        timing = dyadic_timing(rng)
        dist = all_pairs_shuttle_cost(g, timing)
        want = dijkstra_all_pairs(g, timing)
        for u in range(g.num_nodes):
            for v in range(g.num_nodes):
                assert dist.matrix[u, v] == want[u][v]


def test_distance_matrix_invariants():
    rng = random.Random(12)
    for _ in range(20):
        g = build_position_graph(random_spec(rng))
        m = all_pairs_shuttle_cost(g, dyadic_timing(rng)).matrix
        assert np.array_equal(m, m.T)
        assert np.all(np.diag(m) == 0.0)
        n = g.num_nodes
        for k in range(n):
            assert np.all(m <= m[:, k, None] + m[None, k, :] + 1e-12)


def test_mini_unit_weight_distances(mini):
    # Hand count along the 6-node chain t1:1 t1:0 s1 s2 t2:0 t2:1.
    _, g, dist = mini
    chain = ["t1:1", "t1:0", "s1", "s2", "t2:0", "t2:1"]
    for i, a in enumerate(chain):
        for j, b in enumerate(chain):
            assert dist.matrix[g.node_index(a), g.node_index(b)] == abs(i - j)
    assert dist.matrix[g.node_index("t1:1"), g.node_index("t2:0")] == 4.0


def test_nearest_free_trap_distance_mini(mini):
    _, g, dist = mini
    phi = IonAssignment([g.node_index("t1:0"), g.node_index("t1:1"),
                         g.node_index("t2:0")], g.num_nodes)
    # only free executable slot is t2:1
    assert nearest_free_trap_distance(g.node_index("t1:1"), phi, g, dist) == 5.0
    assert nearest_free_trap_distance(g.node_index("t2:0"), phi, g, dist) == 1.0
    full = IonAssignment([g.node_index(n) for n in
                          ("t1:0", "t1:1", "t2:0", "t2:1")], g.num_nodes)
    assert math.isinf(
        nearest_free_trap_distance(g.node_index("s1"), full, g, dist))


def test_nearest_free_trap_ignores_storage():
    spec = ArchitectureSpec(
        [TrapSpec("t1", 1, "executable", ("s1", None)),
         TrapSpec("t2", 2, "storage", ("s2", None))],
        [JunctionSpec("j1", ("s1", "s2"))],
        [SegmentSpec("s1"), SegmentSpec("s2")])
    g = build_position_graph(spec)
    dist = all_pairs_shuttle_cost(g, TimingModel(split=1, merge=1, move=1,
                                                 inner_swap=1, gate_1q=1,
                                                 gate_2q=1))
    phi = IonAssignment([g.node_index("t1:0")], g.num_nodes)
    # t1 full, t2 has room but is storage: no free executable slot anywhere
    assert math.isinf(
        nearest_free_trap_distance(g.node_index("s1"), phi, g, dist))

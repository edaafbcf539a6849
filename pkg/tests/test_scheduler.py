import itertools
import math
import random

import pytest

from ionroute.arch import (ArchitectureSpec, JunctionSpec, SegmentSpec,
                           TimingModel, TrapSpec, all_pairs_shuttle_cost,
                           build_position_graph, preset)
from ionroute.circuit import Circuit, advance, initial_front, partition_blocks
from ionroute.errors import CapacityError, RoutingError
from ionroute.scheduler import (ExecuteBlock, SearchConfig,
                                escape_local_minimum, fold_permutation,
                                heuristic_score, initial_layout, replay,
                                resolve_congestion, route, select_permutation)
from ionroute.state import IonAssignment, Move, executable_trap, legal_moves

from generators import random_circuit, random_spec
from oracles import direct_cost_score, optimal_gather_cost

UNIT = TimingModel(split=1, merge=1, move=1, inner_swap=1, gate_1q=1,
                   gate_2q=1)


def mini():
    g = build_position_graph(preset("MINI", 2))
    return g, all_pairs_shuttle_cost(g, UNIT)


def place(g, names):
    return IonAssignment([g.node_index(n) for n in names], g.num_nodes)


def test_heuristic_matches_direct_formula_on_mini_example():
    g, dist = mini()
    cfg = SearchConfig()
    phi = place(g, ["t1:0", "t1:1", "t2:0"])
    front = [(1, 2)]
    got = heuristic_score(front, [], phi, dist, g, cfg)
    oracle = direct_cost_score(front, [], phi, dist.matrix, g, cfg.w_e)
    assert got == pytest.approx(oracle, abs=1e-12)
    # frozen from the hand-evaluated chain: max-pair 4 plus 5 + 1 to the
    # only free slot t2:1
    assert got == 10.0


def test_heuristic_is_infinite_when_every_trap_is_full():
    g, dist = mini()
    phi = place(g, ["t1:0", "t1:1", "t2:0", "t2:1"])
    score = heuristic_score([(0, 3)], [], phi, dist, g, SearchConfig())
    assert math.isinf(score)


def test_co_located_pair_scores_best_among_neighbors():
    # Pair together in a trap that still has a free slot: no single move
    # may look better than staying put.
    g = build_position_graph(preset("MINI", 3))
    dist = all_pairs_shuttle_cost(g, UNIT)
    cfg = SearchConfig()
    phi = place(g, ["t1:0", "t1:1"])
    here = heuristic_score([(0, 1)], [], phi, dist, g, cfg)
    from ionroute.state import apply_move
    for mv in legal_moves(phi, g):
        moved = heuristic_score([(0, 1)], [], apply_move(phi, mv, g), dist, g,
                                cfg)
        assert here <= moved


def test_heuristic_width_one_and_extended_weighting():
    g, dist = mini()
    cfg = SearchConfig(w_e=0.5)
    phi = place(g, ["s1", "t2:0"])
    f = heuristic_score([(0,)], [], phi, dist, g, cfg)
    oracle = direct_cost_score([(0,)], [], phi, dist.matrix, g, 0.5)
    assert f == pytest.approx(oracle)
    both = heuristic_score([(0,)], [(1,)], phi, dist, g, cfg)
    e_only = direct_cost_score([], [(1,)], phi, dist.matrix, g, 0.5)
    assert both == pytest.approx(f + e_only)


def test_heuristic_equivalence_fuzz():
    rng = random.Random(33)
    cfg = SearchConfig(w_e=0.7, lookahead=6)
    for _ in range(150):
        spec = random_spec(rng)
        g = build_position_graph(spec)
        dist = all_pairs_shuttle_cost(g, UNIT)
        n_ions = rng.randint(1, g.num_nodes)
        phi = IonAssignment(rng.sample(range(g.num_nodes), n_ions),
                            g.num_nodes)
        def rand_blocks(count):
            out = []
            for _ in range(count):
                w = rng.randint(1, min(3, n_ions))
                out.append(tuple(rng.sample(range(n_ions), w)))
            return out
        front = rand_blocks(rng.randint(1, 3))
        ext = rand_blocks(rng.randint(0, 3))
        got = heuristic_score(front, ext, phi, dist, g, cfg)
        want = direct_cost_score(front, ext, phi, dist.matrix, g, cfg.w_e)
        if math.isinf(want):
            assert math.isinf(got)
        else:
            assert got == pytest.approx(want, abs=1e-9)


def test_fold_permutation_relabels_in_place():
    g, _ = mini()
    phi = place(g, ["t1:0", "t1:1", "t2:0"])
    out = fold_permutation(phi, (0, 1), (1, 0))
    assert out.position(0) == g.node_index("t1:1")
    assert out.position(1) == g.node_index("t1:0")
    assert out.position(2) == g.node_index("t2:0")
    assert fold_permutation(phi, (0, 1), (0, 1)) == phi
    assert fold_permutation(out, (0, 1), (1, 0)) == phi


class FakeBlock:
    def __init__(self, bid, qubits, n2=1):
        self.id = bid
        self.qubits = tuple(sorted(qubits))
        self.n_1q = 0
        self.n_2q = n2
        self.two_qubit_gate_count = n2
        self.width = len(qubits)


def test_select_permutation_identity_for_shaw_and_width_one():
    g, dist = mini()
    phi = place(g, ["t1:0", "t1:1"])
    blk = FakeBlock(0, (0, 1))
    cfg = SearchConfig(permutation_enabled=False)
    assert select_permutation(blk, phi, "t1", cfg=cfg) == (0, 1)
    one = FakeBlock(0, (0,))
    assert select_permutation(one, phi, "t1",
                              cfg=SearchConfig()) == (0,)


def test_select_permutation_breaks_ties_toward_the_next_block():
    # Block (0, 1) executes in t1; the next front block pairs q1 with q2
    # sitting in t2. Swapping puts q1 on the segment-side slot t1:0, two
    # steps closer to q2, and must win the tie.
    c = Circuit(3)
    c.add("cx", (0, 1))
    c.add("cx", (1, 2))
    dag = partition_blocks(c, 2)
    g, dist = mini()
    cfg = SearchConfig()
    phi = place(g, ["t1:0", "t1:1", "t2:0"])  # q1 inner; swapping helps it
    fs = initial_front(dag, cfg.lookahead)
    fs_after = advance(fs, dag, 0)
    blk = dag.blocks[0]

    # exhaustive oracle over both permutations
    scores = {}
    for perm in itertools.permutations(range(2)):
        folded = fold_permutation(phi, blk.qubits, perm)
        scores[perm] = direct_cost_score(
            [dag.blocks[b].qubits for b in fs_after.front],
            [dag.blocks[b].qubits for b in fs_after.extended],
            folded, dist.matrix, g, cfg.w_e)
    best = min(scores, key=lambda p: (scores[p], p))
    got = select_permutation(blk, phi, "t1", None, fs_after=fs_after, dag=dag,
                             dist=dist, g=g, cfg=cfg)
    assert got == best
    # sanity: the swap really is strictly better here, so the tie-break bit
    assert scores[(1, 0)] < scores[(0, 1)]
    assert got == (1, 0)


def test_select_permutation_cost_table_oracle():
    from ionroute.scheduler import make_table_oracle
    blk = FakeBlock(3, (0, 1))
    oracle = make_table_oracle({"3": {"0,1": 9.0, "1,0": 2.0}})
    g, dist = mini()
    phi = place(g, ["t1:0", "t1:1"])
    got = select_permutation(blk, phi, "t1", oracle, cfg=SearchConfig())
    assert got == (1, 0)


def test_route_executes_without_shuttles_when_already_placed():
    g, dist = mini()
    c = Circuit(2)
    c.add("cx", (0, 1))
    c.add("cx", (1, 0))
    dag = partition_blocks(c, 2)
    phi0 = place(g, ["t1:0", "t1:1"])
    instrs, phi = route(dag, phi0, g, dist, SearchConfig())
    assert all(isinstance(i, ExecuteBlock) for i in instrs)
    assert replay(instrs, phi0, g) == phi


def test_route_rejects_blocks_wider_than_any_executable_trap():
    g, dist = mini()
    c = Circuit(3)
    c.add("cx", (0, 1))
    c.add("cx", (1, 2))
    c.add("cx", (0, 2))
    dag = partition_blocks(c, 3)  # one width-3 block; MINI traps hold 2
    phi0 = place(g, ["t1:0", "t1:1", "t2:0"])
    with pytest.raises(CapacityError):
        route(dag, phi0, g, dist, SearchConfig())


def test_route_budget_guard_trips():
    g, dist = mini()
    c = Circuit(3)
    c.add("cx", (0, 2))
    dag = partition_blocks(c, 2)
    phi0 = place(g, ["t1:0", "t1:1", "t2:0"])
    with pytest.raises(RoutingError, match="budget"):
        route(dag, phi0, g, dist, SearchConfig(move_budget_factor=1))


def test_route_full_capacity_mini():
    # Four ions fill both traps completely; routing must still execute a
    # cross-trap block (layout can pick a workable placement).
    g, dist = mini()
    c = Circuit(4)
    c.add("cx", (0, 2))
    dag = partition_blocks(c, 2)
    cfg = SearchConfig(seed=3)
    phi0 = initial_layout(dag, g, dist, cfg)
    instrs, phi = route(dag, phi0, g, dist, cfg)
    assert replay(instrs, phi0, g) == phi
    assert sum(1 for i in instrs if isinstance(i, ExecuteBlock)) == 1


def test_route_is_deterministic():
    rng = random.Random(4)
    spec = random_spec(rng, routable=True)
    g = build_position_graph(spec)
    dist = all_pairs_shuttle_cost(g, UNIT)
    nq = min(5, int(g.trap_capacity.sum()))
    exec_caps = [int(g.trap_capacity[i]) for i in range(len(g.trap_ids))
                 if g.trap_executable[i]]
    k = min(2, max(exec_caps))
    if k < 2 or nq < 2:
        pytest.skip("drawn device too small")
    c = random_circuit(rng, nq, 12)
    dag = partition_blocks(c, k)
    if dag.max_width() > max(exec_caps):
        pytest.skip("block too wide for drawn device")
    cfg = SearchConfig(seed=9)
    phi0 = initial_layout(dag, g, dist, cfg)
    a = route(dag, phi0, g, dist, cfg)
    b = route(dag, phi0, g, dist, cfg)
    assert a[0] == b[0]
    assert a[1] == b[1]


def test_escape_returns_nothing_when_already_co_located():
    g, dist = mini()
    phi = place(g, ["t1:0", "t1:1"])
    moves, phi2 = escape_local_minimum(FakeBlock(0, (0, 1)), phi, g, dist,
                                       SearchConfig())
    assert moves == []
    assert phi2 == phi


def linear_three_trap_device():
    # t1 -- s1 -(j1)- s2 -(j2)- s3 -- t2, plus a side trap on each junction
    spec = ArchitectureSpec(
        [TrapSpec("t1", 2, ends=("s1", None)),
         TrapSpec("t2", 2, ends=("s3", None)),
         TrapSpec("t3", 1, ends=("s4", None)),
         TrapSpec("t4", 1, ends=("s5", None))],
        [JunctionSpec("j1", ("s1", "s2", "s4")),
         JunctionSpec("j2", ("s2", "s3", "s5"))],
        [SegmentSpec(f"s{i}") for i in range(1, 6)])
    g = build_position_graph(spec)
    return g, all_pairs_shuttle_cost(g, UNIT)


def test_escape_follows_the_free_shortest_path_exactly():
    g, dist = linear_three_trap_device()
    # q1 rests on t2's inner slot, so t2's entry and the whole corridor are
    # free: the travelling ion takes exactly the four shortest-path edges
    phi = place(g, ["t1:0", "t2:1"])
    moves, phi2 = escape_local_minimum(FakeBlock(0, (0, 1)), phi, g, dist,
                                       SearchConfig())
    assert executable_trap(phi2, (0, 1), g) == "t2"
    assert [m.kind for m in moves] == ["split", "move", "move", "merge"]
    assert all(m.qubit == 0 for m in moves)


def test_resolve_congestion_base_case_two_moves():
    g, dist = linear_three_trap_device()
    # q0 on s1 wants s2 (held by q1); s4 is an empty off-path neighbor
    phi = place(g, ["s1", "s2"])
    res = resolve_congestion(g.node_index("s1"), g.node_index("s2"),
                             (g.node_index("s1"), g.node_index("s2")),
                             phi, g, depth=4, dist=dist)
    assert res is not None
    moves, phi2 = res
    assert len(moves) == 2
    assert moves[0].qubit == 1 and moves[1].qubit == 0
    assert phi2.position(0) == g.node_index("s2")


def test_resolve_congestion_recurses_through_two_blockers():
    g, dist = linear_three_trap_device()
    # corridor s1(q0) s2(q1) s3(q2), q0 pushing right; side pockets s4/s5
    # are on-path-free escape room for the blockers
    phi = place(g, ["s1", "s2", "s3"])
    path = (g.node_index("s1"), g.node_index("s2"))
    res = resolve_congestion(g.node_index("s1"), g.node_index("s2"), path,
                             phi, g, depth=4, dist=dist)
    assert res is not None
    moves, phi2 = res
    assert phi2.position(0) == g.node_index("s2")
    # replay validity is implied: resolve applied each move as it was built


def test_resolve_congestion_signals_deadlock():
    g, dist = linear_three_trap_device()
    # every neighbor of s2 is occupied or on the path and depth is exhausted
    phi = place(g, ["s1", "s2", "s3", "s4", "s5"])
    res = resolve_congestion(g.node_index("s1"), g.node_index("s2"),
                             (g.node_index("s1"), g.node_index("s2"),
                              g.node_index("s3"), g.node_index("s4"),
                              g.node_index("s5")),
                             phi, g, depth=5, dist=dist)
    assert res is None


def test_escape_evicts_a_full_target_trap():
    g, dist = linear_three_trap_device()
    # both wide traps are full of bystanders, so gathering (q0, q1) must
    # push someone out of the chosen trap
    phi = place(g, ["t3:0", "t2:0", "t2:1", "t1:0", "t1:1"])
    moves, phi2 = escape_local_minimum(FakeBlock(0, (0, 1)), phi, g, dist,
                                       SearchConfig())
    assert executable_trap(phi2, (0, 1), g) in ("t1", "t2")
    assert any(m.qubit in (2, 3, 4) for m in moves)  # a bystander moved


def test_push_back_returns_segment_ions_to_traps():
    from ionroute.scheduler import _Orchestrator
    g, dist = linear_three_trap_device()
    phi = place(g, ["s1", "s2", "t1:0"])
    orch = _Orchestrator(g, dist, SearchConfig(), phi.copy())
    orch.push_back()
    for s in g.segment_nodes:
        assert not orch.phi.is_occupied(s)


def test_initial_layout_is_deterministic_and_injective():
    g, dist = mini()
    c = Circuit(3)
    c.add("cx", (0, 1))
    dag = partition_blocks(c, 2)
    cfg = SearchConfig(seed=11)
    a = initial_layout(dag, g, dist, cfg)
    b = initial_layout(dag, g, dist, cfg)
    assert a == b
    assert len({a.position(q) for q in range(3)}) == 3
    for q in range(3):
        assert not g.is_segment(a.position(q))


def test_initial_layout_collocates_a_lone_interaction():
    # Exhaustive oracle: among all two-ion slot placements, exactly those
    # with both ions in one trap route without shuttles.
    g, dist = mini()
    c = Circuit(2)
    c.add("cx", (0, 1))
    dag = partition_blocks(c, 2)
    slots = [n for n in range(g.num_nodes) if not g.is_segment(n)]
    zero_shuttle = set()
    for a in slots:
        for b in slots:
            if a == b:
                continue
            phi0 = IonAssignment([a, b], g.num_nodes)
            instrs, _ = route(dag, phi0, g, dist, SearchConfig())
            if all(isinstance(i, ExecuteBlock) for i in instrs):
                zero_shuttle.add((a, b))
    same_trap = {(a, b) for a in slots for b in slots if a != b
                 and g.node_trap[a] == g.node_trap[b]}
    assert zero_shuttle == same_trap
    # the layout must land in one of those placements
    for seed in range(5):
        phi0 = initial_layout(dag, g, dist, SearchConfig(seed=seed))
        instrs, _ = route(dag, phi0, g, dist, SearchConfig(seed=seed))
        assert all(isinstance(i, ExecuteBlock) for i in instrs)


def test_layout_rejects_more_qubits_than_slots():
    g, dist = mini()
    c = Circuit(5)
    c.add("cx", (0, 1))
    dag = partition_blocks(c, 2)
    with pytest.raises(CapacityError):
        initial_layout(dag, g, dist, SearchConfig())


def test_route_stays_near_optimal_on_small_instances():
    # Exhaustive state-space optimum vs the heuristic route on MINI with
    # three ions and one entangling gate.
    g, dist = mini()
    timing = UNIT
    rng = random.Random(5)
    nodes = list(range(g.num_nodes))
    checked = 0
    for _ in range(40):
        phi0 = IonAssignment(rng.sample(nodes, 3), g.num_nodes)
        a, b = rng.sample(range(3), 2)
        c = Circuit(3)
        c.add("cx", (a, b))
        dag = partition_blocks(c, 2)
        opt = optimal_gather_cost(phi0, g, timing, (a, b))
        assert math.isfinite(opt)
        instrs, _ = route(dag, phi0, g, dist, SearchConfig())
        cost = sum(1 for i in instrs if isinstance(i, Move))
        assert cost <= 2 * opt + 1e-9, (phi0, (a, b), cost, opt)
        checked += 1
    assert checked == 40


def test_replay_rejects_corrupted_instruction_lists():
    from ionroute.errors import IllegalMoveError
    g, dist = mini()
    phi0 = place(g, ["t1:0", "t2:0"])
    bad = [ExecuteBlock(0, "t1", (0, 1), (0, 1), 0, 1)]
    with pytest.raises(IllegalMoveError, match="not co-located"):
        replay(bad, phi0, g)

"""Command-line surface: compile, validate, gen, arch, bench, bench-kernels."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import _kernels, __version__
from .arch import (PRESET_NAMES, ArchitectureSpec, TimingModel,
                   all_pairs_shuttle_cost, build_position_graph, preset)
from .circuit import generate, partition_blocks
from .errors import (ArchitectureError, CapacityError, IonRouteError,
                     QasmError, RoutingError, TraceFormatError)
from .qasm import emit_qasm, parse_qasm
from .scheduler import SearchConfig, initial_layout, make_table_oracle, route
from .timeline import (dump_trace, load_trace, schedule, stats,
                       trace_document, validate)

log = logging.getLogger("ionroute")

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_PARSE = 2
EXIT_ARCH = 3
EXIT_CAPACITY = 4
EXIT_GUARD = 5
EXIT_TRACE = 6

REPORT_SCHEMA = "ionroute-report-v1"

# Trap-capacity grid used by the benchmark harness, per circuit width.
BENCH_CAPACITIES = {
    16: {"H": (4, 5), "G2x3": (3, 4)},
    20: {"H": (5, 6), "G2x3": (4, 5)},
}
BENCH_KINDS = ("qft", "qaoa_er", "qv_like")

BENCH_DISCLAIMER = (
    "note: shuttle times depend on device timing constants and layout "
    "randomness; absolute microsecond values are not comparable across "
    "toolchains, only the relative shaper/shaw columns are meaningful.")


def _setup_logging():
    level = os.environ.get("IONROUTE_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO,
              "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s")


def _load_arch(name_or_path: str, capacity: int) -> ArchitectureSpec:
    if name_or_path in PRESET_NAMES:
        return preset(name_or_path, capacity)
    path = Path(name_or_path)
    if not path.exists():
        raise ArchitectureError(f"no preset or file named {name_or_path!r}")
    return ArchitectureSpec.from_json(path.read_text())


def _load_timing(path) -> TimingModel:
    if path is None:
        return TimingModel()
    try:
        return TimingModel.from_dict(json.loads(Path(path).read_text()))
    except (OSError, ValueError, TypeError) as exc:
        raise ArchitectureError(f"bad timing file: {exc}") from exc


def _config_dict(cfg: SearchConfig, k: int, algo: str) -> dict:
    return {
        "algo": algo,
        "k": k,
        "w_e": cfg.w_e,
        "lookahead": cfg.lookahead,
        "cycle_window": cfg.cycle_window,
        "pushback_threshold": cfg.pushback_threshold,
        "layout_passes": cfg.layout_passes,
        "seed": cfg.seed,
    }


def _compile_circuit(circuit, spec, timing, cfg, k, algo, oracle=None):
    """Shared compile pipeline; returns (trace document, stats, seconds)."""
    t0 = time.perf_counter()
    g = build_position_graph(spec)
    dist = all_pairs_shuttle_cost(g, timing)
    dag = partition_blocks(circuit, k)
    phi0 = initial_layout(dag, g, dist, cfg, oracle)
    instrs, _ = route(dag, phi0, g, dist, cfg, oracle)
    ts = schedule(instrs, phi0, g, timing)
    violations = validate(ts, phi0, g, spec)
    if violations:
        raise RoutingError(
            "internal error: schedule failed validation: "
            + "; ".join(str(v) for v in violations[:3]))
    seconds = time.perf_counter() - t0
    doc = trace_document(ts, spec=spec, g=g, phi0=phi0, k=k, algo=algo,
                         seed=cfg.seed, config=_config_dict(cfg, k, algo))
    return doc, stats(ts), seconds


def cmd_compile(args) -> int:
    out_dir = Path(args.out)
    report = {
        "schema": REPORT_SCHEMA,
        "arch": args.arch,
        "seed": args.seed,
        "outcome": "ok",
    }

    def fail(code, reason, exc):
        report["outcome"] = f"failed: {reason}"
        report["error"] = str(exc)
        print(json.dumps(report, sort_keys=True))
        log.error("%s: %s", reason, exc)
        return code

    try:
        text = Path(args.circuit).read_text()
    except OSError as exc:
        return fail(EXIT_PARSE, "unreadable circuit", exc)
    report["input_digest"] = hashlib.sha256(text.encode()).hexdigest()

    try:
        circuit = parse_qasm(text)
    except QasmError as exc:
        return fail(EXIT_PARSE, "parse error", exc)
    try:
        spec = _load_arch(args.arch, args.capacity)
        timing = _load_timing(args.timing)
    except ArchitectureError as exc:
        return fail(EXIT_ARCH, "architecture error", exc)

    cfg = SearchConfig(w_e=args.we, lookahead=args.lookahead,
                       permutation_enabled=(args.algo == "shaper"),
                       layout_passes=args.passes, seed=args.seed)
    oracle = None
    if args.perm_costs:
        oracle = make_table_oracle(json.loads(Path(args.perm_costs).read_text()))
    try:
        doc, st, seconds = _compile_circuit(circuit, spec, timing, cfg,
                                            args.k, args.algo, oracle)
    except CapacityError as exc:
        return fail(EXIT_CAPACITY, "capacity exceeded", exc)
    except RoutingError as exc:
        return fail(EXIT_GUARD, "routing failed", exc)
    except IonRouteError as exc:
        return fail(EXIT_FAIL, "compile failed", exc)

    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "trace.json").write_text(dump_trace(doc))
    stats_doc = st.to_dict()
    (out_dir / "stats.json").write_text(
        json.dumps(stats_doc, sort_keys=True, indent=2) + "\n")
    report["config"] = doc["config"]
    report["stats"] = stats_doc
    report["compile_seconds"] = round(seconds, 3)
    (out_dir / "report.json").write_text(
        json.dumps(report, sort_keys=True, indent=2) + "\n")
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        doc = json.loads(Path(args.trace).read_text())
        spec, g, timing, phi0, ts, k = load_trace(doc)
    except (OSError, json.JSONDecodeError, TraceFormatError,
            ArchitectureError) as exc:
        print(f"malformed trace: {exc}", file=sys.stderr)
        return EXIT_TRACE

    if args.arch:
        try:
            spec = _load_arch(args.arch, args.capacity)
            g = build_position_graph(spec)
        except ArchitectureError as exc:
            print(f"architecture error: {exc}", file=sys.stderr)
            return EXIT_ARCH

    violations = list(validate(ts, phi0, g, spec))

    if args.circuit:
        try:
            circuit = parse_qasm(Path(args.circuit).read_text())
        except (OSError, QasmError) as exc:
            print(f"circuit error: {exc}", file=sys.stderr)
            return EXIT_PARSE
        dag = partition_blocks(circuit, k) if circuit.gates else None
        executed = [ev for ev in sorted(ts.events, key=lambda e: e.index)
                    if ev.kind == "execute"]
        want = {b.id: b for b in dag.blocks} if dag else {}
        got = [ev.block for ev in executed]
        if sorted(got) != sorted(want):
            violations.append(
                _coverage_violation(f"executed blocks {sorted(got)} != "
                                    f"circuit blocks {sorted(want)}"))
        else:
            seen = set()
            for ev in executed:
                if tuple(ev.qubits) != want[ev.block].qubits:
                    violations.append(_coverage_violation(
                        f"block {ev.block} qubits {list(ev.qubits)} differ "
                        f"from the circuit partition"))
                if any(p not in seen for p in
                       _block_preds(dag, ev.block)):
                    violations.append(_coverage_violation(
                        f"block {ev.block} executed before a predecessor"))
                seen.add(ev.block)

    for v in violations:
        print(str(v))
    if violations:
        print(f"{len(violations)} violation(s)")
        return EXIT_FAIL
    print("schedule is valid")
    return EXIT_OK


def _coverage_violation(msg):
    from .timeline import Violation
    return Violation(None, 0.0, msg)


def _block_preds(dag, block_id):
    return dag.pred[block_id] if dag else []


def cmd_gen(args) -> int:
    circuit = generate(args.kind, args.n, seed=args.seed, layers=args.layers,
                       depth=args.depth)
    text = emit_qasm(circuit)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_arch(args) -> int:
    try:
        spec = preset(args.preset, args.capacity)
    except ArchitectureError as exc:
        print(f"architecture error: {exc}", file=sys.stderr)
        return EXIT_ARCH
    text = spec.to_json()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def run_bench_cell(kind, n, arch_name, capacity, seed, passes=3):
    """Compile one benchmark cell with both algorithms; returns row dict."""
    circuit = generate(kind, n, seed=seed)
    spec = preset(arch_name, capacity)
    timing = TimingModel()
    row = {"kind": kind, "n": n, "arch": arch_name, "capacity": capacity}
    for algo in ("shaper", "shaw"):
        cfg = SearchConfig(permutation_enabled=(algo == "shaper"),
                           layout_passes=passes, seed=seed)
        doc, st, seconds = _compile_circuit(circuit, spec, timing, cfg, 3,
                                            algo)
        row[algo] = {
            "shuttle_makespan_us": st.shuttle_makespan_us,
            "makespan_us": st.makespan_us,
            "sp": st.sp,
            "seconds": round(seconds, 2),
        }
    return row


def bench_rows(kinds=BENCH_KINDS, sizes=(16, 20), seed=0, passes=3):
    for kind in kinds:
        for n in sizes:
            for arch_name, caps in BENCH_CAPACITIES[n].items():
                for capacity in caps:
                    yield run_bench_cell(kind, n, arch_name, capacity, seed,
                                         passes)


def format_bench_table(rows) -> str:
    header = (f"{'circuit':<12}{'arch':<6}{'cap':>4}"
              f"{'shaper us':>12}{'sp':>6}{'s':>8}"
              f"{'shaw us':>12}{'sp':>6}{'s':>8}")
    lines = [header, "-" * len(header)]
    for r in rows:
        a, b = r["shaper"], r["shaw"]
        lines.append(
            f"{r['kind'] + '_' + str(r['n']):<12}{r['arch']:<6}"
            f"{r['capacity']:>4}"
            f"{a['shuttle_makespan_us']:>12.0f}{a['sp']:>6.2f}"
            f"{a['seconds']:>8.2f}"
            f"{b['shuttle_makespan_us']:>12.0f}{b['sp']:>6.2f}"
            f"{b['seconds']:>8.2f}")
    lines.append(BENCH_DISCLAIMER)
    return "\n".join(lines) + "\n"


def cmd_bench(args) -> int:
    rows = []
    for row in bench_rows(kinds=args.kinds.split(","),
                          sizes=tuple(int(s) for s in args.sizes.split(",")),
                          seed=args.seed, passes=args.passes):
        rows.append(row)
        log.info("bench cell done: %s", row)
    table = format_bench_table(rows)
    sys.stdout.write(table)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "bench.json").write_text(
            json.dumps(rows, sort_keys=True, indent=2) + "\n")
        (out / "bench.txt").write_text(table)
    return EXIT_OK


def cmd_bench_kernels(args) -> int:
    from .bench_kernels import run_kernel_benchmark
    sys.stdout.write(run_kernel_benchmark(args.repeat))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ionroute",
        description="Compile quantum circuits onto shuttling trapped-ion "
                    "(QCCD) devices.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compile", help="compile a circuit to a shuttle trace")
    c.add_argument("--arch", required=True,
                   help="preset (H, G2x3, MINI) or architecture JSON file")
    c.add_argument("--capacity", type=int, default=3)
    c.add_argument("--circuit", required=True)
    c.add_argument("--algo", choices=("shaper", "shaw"), default="shaper")
    c.add_argument("--k", type=int, default=3, help="block width limit")
    c.add_argument("--we", type=float, default=0.5)
    c.add_argument("--lookahead", type=int, default=20)
    c.add_argument("--passes", type=int, default=3)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--timing", default=None, help="timing model JSON file")
    c.add_argument("--perm-costs", default=None,
                   help="per-(block, permutation) cost table JSON")
    c.add_argument("--out", required=True, help="output directory")
    c.set_defaults(func=cmd_compile)

    v = sub.add_parser("validate", help="re-check a trace against the rules")
    v.add_argument("--trace", required=True)
    v.add_argument("--arch", default=None)
    v.add_argument("--capacity", type=int, default=3)
    v.add_argument("--circuit", default=None)
    v.set_defaults(func=cmd_validate)

    gen = sub.add_parser("gen", help="generate a benchmark circuit")
    gen.add_argument("kind", choices=("qft", "qaoa_er", "qv_like"))
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--layers", type=int, default=1)
    gen.add_argument("--depth", type=int, default=None)
    gen.add_argument("--out", default=None)
    gen.set_defaults(func=cmd_gen)

    a = sub.add_parser("arch", help="emit a preset architecture file")
    a.add_argument("preset", choices=PRESET_NAMES)
    a.add_argument("--capacity", type=int, default=3)
    a.add_argument("--out", default=None)
    a.set_defaults(func=cmd_arch)

    b = sub.add_parser("bench", help="run the shaper-vs-shaw benchmark grid")
    b.add_argument("--kinds", default=",".join(BENCH_KINDS))
    b.add_argument("--sizes", default="16,20")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--passes", type=int, default=3)
    b.add_argument("--out", default=None)
    b.set_defaults(func=cmd_bench)

    kb = sub.add_parser("bench-kernels",
                        help="time the compiled kernels against the "
                             "pure-Python fallback")
    kb.add_argument("--repeat", type=int, default=5)
    kb.set_defaults(func=cmd_bench_kernels)
    return ap


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()

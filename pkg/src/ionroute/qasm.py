"""OpenQASM 2.0 subset parser and canonical emitter.

Supported statements: the version header, includes, one qreg, cregs,
gate applications from a fixed set, measure and barrier (both ignored with
a warning). Gate parameters are constant arithmetic over numbers and pi.
"""

from __future__ import annotations

import logging
import math
import re

from .circuit import GATE_PARAMS, GATE_QUBITS, Circuit, Gate
from .errors import QasmError

log = logging.getLogger("ionroute")

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*)
  | (?P<real>(\d+\.\d*|\.\d+)([eE][+-]?\d+)?|\d+[eE][+-]?\d+)
  | (?P<int>\d+)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"[^"]*")
  | (?P<arrow>->)
  | (?P<sym>[;,()\[\]+\-*/])
    """,
    re.VERBOSE,
)


class _Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind = kind
        self.text = text
        self.line = line
        self.col = col


def _tokenize(text):
    tokens = []
    line = 1
    line_start = 0
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise QasmError(f"unexpected character {text[pos]!r}",
                            line, pos - line_start + 1)
        kind = m.lastgroup
        value = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(_Token(kind, value, line, m.start() - line_start + 1))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            line_start = m.start() + value.rindex("\n") + 1
        pos = m.end()
    tokens.append(_Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        raise QasmError(message, tok.line, tok.col)

    def expect(self, kind, text=None):
        tok = self.next()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text if text is not None else kind
            self.error(f"expected {want!r}, found {tok.text!r}", tok)
        return tok

    # -- constant expressions -------------------------------------------

    def parse_expr(self):
        value = self.parse_term()
        while self.peek().text in ("+", "-"):
            op = self.next().text
            rhs = self.parse_term()
            value = value + rhs if op == "+" else value - rhs
        return value

    def parse_term(self):
        value = self.parse_factor()
        while self.peek().text in ("*", "/"):
            op = self.next().text
            rhs = self.parse_factor()
            if op == "*":
                value = value * rhs
            else:
                if rhs == 0:
                    self.error("division by zero in parameter")
                value = value / rhs
        return value

    def parse_factor(self):
        tok = self.peek()
        if tok.text == "-":
            self.next()
            return -self.parse_factor()
        if tok.text == "+":
            self.next()
            return self.parse_factor()
        if tok.text == "(":
            self.next()
            value = self.parse_expr()
            self.expect("sym", ")")
            return value
        if tok.kind in ("int", "real"):
            self.next()
            return float(tok.text)
        if tok.kind == "id" and tok.text == "pi":
            self.next()
            return math.pi
        self.error(f"bad parameter expression at {tok.text!r}", tok)


def parse_qasm(text: str) -> Circuit:
    """Parse an OpenQASM 2.0 program into a Circuit.

    measure/barrier statements are skipped (logged); swap gates are lowered
    to three cx.
    """
    p = _Parser(text)
    qreg_name = None
    qreg_size = 0
    creg_names = set()
    gates = []
    skipped_measure = 0
    skipped_barrier = 0

    def parse_qubit_operand():
        tok = p.expect("id")
        if tok.text in creg_names:
            p.error(f"{tok.text!r} is a classical register", tok)
        if tok.text != qreg_name:
            p.error(f"unknown quantum register {tok.text!r}", tok)
        if p.peek().text == "[":
            p.next()
            idx_tok = p.expect("int")
            idx = int(idx_tok.text)
            p.expect("sym", "]")
            if idx >= qreg_size:
                p.error(f"qubit index {idx} out of range", idx_tok)
            return idx
        return None  # whole-register broadcast

    def skip_to_semicolon():
        while p.peek().kind != "eof" and p.peek().text != ";":
            p.next()
        p.expect("sym", ";")

    while p.peek().kind != "eof":
        tok = p.peek()
        if tok.kind != "id":
            p.error(f"expected a statement, found {tok.text!r}")
        name = tok.text

        if name == "OPENQASM":
            p.next()
            ver = p.next()
            if not ver.text.startswith("2"):
                p.error(f"unsupported OpenQASM version {ver.text!r}", ver)
            p.expect("sym", ";")
            continue
        if name == "include":
            p.next()
            p.expect("string")
            p.expect("sym", ";")
            continue
        if name == "qreg":
            p.next()
            reg = p.expect("id")
            if qreg_name is not None:
                p.error("only one qreg is supported", reg)
            p.expect("sym", "[")
            size = p.expect("int")
            p.expect("sym", "]")
            p.expect("sym", ";")
            qreg_name = reg.text
            qreg_size = int(size.text)
            continue
        if name == "creg":
            p.next()
            reg = p.expect("id")
            creg_names.add(reg.text)
            p.expect("sym", "[")
            p.expect("int")
            p.expect("sym", "]")
            p.expect("sym", ";")
            continue
        if name == "measure":
            p.next()
            skip_to_semicolon()
            skipped_measure += 1
            continue
        if name == "barrier":
            p.next()
            skip_to_semicolon()
            skipped_barrier += 1
            continue

        if name not in GATE_QUBITS:
            p.error(f"unsupported gate {name!r}")
        if qreg_name is None:
            p.error("gate application before qreg declaration")
        p.next()

        n_params = GATE_PARAMS[name]
        params = []
        if p.peek().text == "(":
            p.next()
            if p.peek().text != ")":
                params.append(p.parse_expr())
                while p.peek().text == ",":
                    p.next()
                    params.append(p.parse_expr())
            p.expect("sym", ")")
        if len(params) != n_params:
            p.error(f"gate {name!r} takes {n_params} parameter(s), "
                    f"got {len(params)}", tok)

        operands = [parse_qubit_operand()]
        while p.peek().text == ",":
            p.next()
            operands.append(parse_qubit_operand())
        p.expect("sym", ";")

        arity = GATE_QUBITS[name]
        if len(operands) != arity:
            p.error(f"gate {name!r} acts on {arity} qubit(s), "
                    f"got {len(operands)}", tok)
        if arity == 1 and operands == [None]:
            targets = [(q,) for q in range(qreg_size)]
        elif None in operands:
            p.error("whole-register operands are only supported for "
                    "single-qubit gates", tok)
        else:
            if arity == 2 and operands[0] == operands[1]:
                p.error(f"gate {name!r} needs distinct qubits, "
                        f"got q[{operands[0]}] twice", tok)
            targets = [tuple(operands)]

        for qs in targets:
            if name == "swap":
                a, b = qs
                gates.append(Gate("cx", (), (a, b)))
                gates.append(Gate("cx", (), (b, a)))
                gates.append(Gate("cx", (), (a, b)))
            else:
                gates.append(Gate(name, tuple(params), qs))

    if qreg_name is None:
        raise QasmError("program declares no qreg")
    if skipped_measure:
        log.warning("ignored %d measure statement(s)", skipped_measure)
    if skipped_barrier:
        log.warning("ignored %d barrier statement(s)", skipped_barrier)
    return Circuit(qreg_size, gates)


def emit_qasm(circuit: Circuit) -> str:
    """Canonical QASM text; parse(emit(c)) is structurally equal to c."""
    lines = [
        "OPENQASM 2.0;",
        'include "qelib1.inc";',
        f"qreg q[{circuit.num_qubits}];",
    ]
    for gate in circuit.gates:
        if gate.params:
            params = "(" + ",".join(repr(v) for v in gate.params) + ")"
        else:
            params = ""
        args = ",".join(f"q[{q}]" for q in gate.qubits)
        lines.append(f"{gate.name}{params} {args};")
    return "\n".join(lines) + "\n"

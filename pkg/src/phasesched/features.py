"""Static program-phase mining over a small textual IR.

The dialect (``.sir`` files)::

    # comment
    func matmul {
        load
        loop {
            loop {
                mulf
                addf
            }
        }
        call barrier
    }

Braces may share a line with other statements (``loop { call io.read }``).
Every non-brace statement is one instruction. Opcode categories:

=====================  ===========
opcode                 category
=====================  ===========
load, store            memory
addi, muli             integer ALU
addf, mulf             floating ALU
lock                   lock
call io.<name>         I/O call
call net.<name>        network (blocking)
call barrier           barrier (blocking)
call sleep             sleep (blocking)
call <other>           plain call
nop                    none
=====================  ===========
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field

from phasesched.core import ProgramPhase


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class InvalidSummaryError(ValueError):
    pass


class DuplicateFunctionError(ValueError):
    pass


OPCODE_CATEGORY = {
    "load": "mem",
    "store": "mem",
    "addi": "int",
    "muli": "int",
    "addf": "fp",
    "mulf": "fp",
    "lock": "lock",
    "nop": None,
}

BLOCKING_CALLS = ("barrier", "net", "sleep")

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*$")
_TOKEN = re.compile(r"\{|\}|[^{}]+")


@dataclass(frozen=True)
class Instr:
    op: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Loop:
    body: tuple
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Function:
    name: str
    body: tuple
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class FunctionSummary:
    name: str
    total_instr: int
    io_calls: tuple[int, ...] = ()
    mem_ops: int = 0
    int_alu: int = 0
    fp_alu: int = 0
    lock_ops: int = 0
    calls_barrier: bool = False
    calls_net: bool = False
    calls_sleep: bool = False
    max_loop_nest: int = 0
    # (instruction index, callee) for barrier/net/sleep call sites
    blocking_sites: tuple[tuple[int, str], ...] = ()


def _classify_op(op: str, line: int) -> str | None:
    """Return the category of one instruction, or raise on unknown opcodes."""
    if op in OPCODE_CATEGORY:
        return OPCODE_CATEGORY[op]
    parts = op.split()
    if len(parts) == 2 and parts[0] == "call" and _IDENT.match(parts[1]):
        callee = parts[1]
        if callee.startswith("io."):
            return "io"
        if callee.startswith("net."):
            return "net"
        if callee in ("barrier", "sleep"):
            return callee
        return "call"
    raise ParseError(f"unknown opcode {op!r}", line)


def _tokens(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        code = raw.split("#", 1)[0]
        for m in _TOKEN.finditer(code):
            tok = " ".join(m.group().split())
            if tok:
                yield lineno, tok


def parse_program(text: str) -> list[Function]:
    """Parse IR source into a list of function ASTs, in source order."""
    functions = []
    stack: list[tuple[str, list, int, str | None]] = []  # (kind, body, line, name)
    pending = None  # header waiting for its "{"
    last_line = 0
    for lineno, tok in _tokens(text):
        last_line = lineno
        if pending is not None:
            if tok != "{":
                raise ParseError(f"expected '{{' after {pending[0]!r}", lineno)
            kind, name, hline = pending
            stack.append((kind, [], hline, name))
            pending = None
            continue
        if tok == "{":
            raise ParseError("unexpected '{'", lineno)
        if tok == "}":
            if not stack:
                raise ParseError("unbalanced '}'", lineno)
            kind, body, hline, name = stack.pop()
            if kind == "func":
                fn = Function(name, tuple(body), hline)
                if _count(fn.body) == 0:
                    raise ParseError(f"empty function {name!r}", hline)
                functions.append(fn)
            else:
                stack[-1][1].append(Loop(tuple(body), hline))
            continue
        words = tok.split()
        if words[0] == "func":
            if stack:
                raise ParseError("nested function definition", lineno)
            if len(words) != 2 or not _IDENT.match(words[1]):
                raise ParseError(f"bad function header {tok!r}", lineno)
            pending = ("func", words[1], lineno)
        elif tok == "loop":
            if not stack:
                raise ParseError("loop outside function", lineno)
            pending = ("loop", None, lineno)
        else:
            if not stack:
                raise ParseError(f"instruction outside function: {tok!r}", lineno)
            _classify_op(tok, lineno)
            stack[-1][1].append(Instr(tok, lineno))
    if pending is not None:
        raise ParseError(f"missing '{{' after {pending[0]!r}", pending[2])
    if stack:
        raise ParseError("unbalanced braces: missing '}'", last_line)
    return functions


def _count(body) -> int:
    return sum(_count(n.body) if isinstance(n, Loop) else 1 for n in body)


def format_program(functions: list[Function], indent: str = "    ") -> str:
    """Pretty-print function ASTs back to IR source."""
    out = []

    def emit(body, depth):
        for node in body:
            if isinstance(node, Loop):
                out.append(f"{indent * depth}loop {{")
                emit(node.body, depth + 1)
                out.append(f"{indent * depth}}}")
            else:
                out.append(f"{indent * depth}{node.op}")

    for fn in functions:
        out.append(f"func {fn.name} {{")
        emit(fn.body, 1)
        out.append("}")
    return "\n".join(out) + "\n"


def summarize(fn: Function) -> FunctionSummary:
    counts = {"mem": 0, "int": 0, "fp": 0, "lock": 0}
    io_calls: list[int] = []
    flags = {"barrier": False, "net": False, "sleep": False}
    sites: list[tuple[int, str]] = []
    total = 0
    max_nest = 0

    def walk(body, depth):
        nonlocal total, max_nest
        max_nest = max(max_nest, depth)
        for node in body:
            if isinstance(node, Loop):
                walk(node.body, depth + 1)
                continue
            cat = _classify_op(node.op, node.line)
            if cat in counts:
                counts[cat] += 1
            elif cat == "io":
                io_calls.append(depth)
            elif cat in flags:
                flags[cat] = True
                sites.append((total, node.op.split()[1]))
            total += 1

    walk(fn.body, 0)
    return FunctionSummary(
        name=fn.name,
        total_instr=total,
        io_calls=tuple(io_calls),
        mem_ops=counts["mem"],
        int_alu=counts["int"],
        fp_alu=counts["fp"],
        lock_ops=counts["lock"],
        calls_barrier=flags["barrier"],
        calls_net=flags["net"],
        calls_sleep=flags["sleep"],
        max_loop_nest=max_nest,
        blocking_sites=tuple(sites),
    )


def parse_ir(text: str) -> list[FunctionSummary]:
    return [summarize(fn) for fn in parse_program(text)]


def io_weight(io_calls) -> float:
    """Expected I/O activity: each call nested in n loops weighs 10**n."""
    return float(sum(10 ** n for n in io_calls))


@dataclass(frozen=True)
class FeatureVector:
    io_dens: float = 0.0
    mem_dens: float = 0.0
    int_dens: float = 0.0
    fp_dens: float = 0.0
    locks_dens: float = 0.0
    barrier: bool = False
    net: bool = False
    sleep: bool = False
    io_weight: float = 0.0
    nesting_factor: int = 0


def extract_features(summary: FunctionSummary) -> FeatureVector:
    total = summary.total_instr
    if total <= 0:
        raise InvalidSummaryError(f"function {summary.name!r} has no instructions")
    return FeatureVector(
        io_dens=len(summary.io_calls) / total,
        mem_dens=summary.mem_ops / total,
        int_dens=summary.int_alu / total,
        fp_dens=summary.fp_alu / total,
        locks_dens=summary.lock_ops / total,
        barrier=summary.calls_barrier,
        net=summary.calls_net,
        sleep=summary.calls_sleep,
        io_weight=io_weight(summary.io_calls),
        nesting_factor=summary.max_loop_nest,
    )


def classify_phase(f: FeatureVector) -> ProgramPhase:
    # IOBound and CPUBound may both hold; listing order decides.
    if f.barrier or f.net or f.sleep or f.locks_dens > 0.5:
        return ProgramPhase.Blocked
    if f.io_dens + f.mem_dens > 0.5 and f.locks_dens == 0:
        return ProgramPhase.IOBound
    if f.int_dens + f.fp_dens > 0.5:
        return ProgramPhase.CPUBound
    return ProgramPhase.Other


@dataclass
class PhaseMap:
    entries: dict[str, tuple[ProgramPhase, FeatureVector]]
    instrumentation: list[dict]

    def phase_of(self, name: str) -> ProgramPhase:
        return self.entries[name][0]

    def to_json(self) -> dict:
        return {
            "functions": {
                name: {"phase": phase.name, "features": asdict(fv)}
                for name, (phase, fv) in self.entries.items()
            },
            "instrumentation": self.instrumentation,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2) + "\n"

    @classmethod
    def from_json(cls, doc: dict) -> PhaseMap:
        entries = {
            name: (ProgramPhase.parse(e["phase"]), FeatureVector(**e["features"]))
            for name, e in doc["functions"].items()
        }
        return cls(entries, list(doc.get("instrumentation", [])))


def build_phase_map(summaries: list[FunctionSummary]) -> PhaseMap:
    entries: dict[str, tuple[ProgramPhase, FeatureVector]] = {}
    points: list[dict] = []
    for s in summaries:
        if s.name in entries:
            raise DuplicateFunctionError(f"duplicate function name {s.name!r}")
        fv = extract_features(s)
        phase = classify_phase(fv)
        entries[s.name] = (phase, fv)
        points.append({"function": s.name, "kind": "entry", "phase": phase.name})
        for index, callee in s.blocking_sites:
            for where in ("before", "after"):
                points.append({"function": s.name, "kind": where, "callee": callee,
                               "instr_index": index,
                               "phase": (ProgramPhase.Blocked if where == "before" else phase).name})
    return PhaseMap(entries, points)

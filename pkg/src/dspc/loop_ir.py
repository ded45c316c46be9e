"""Loop-level IR: counted loops over flat float buffers with affine indexing.

Index arithmetic is exact integer arithmetic over loop variables and is not
metered; the float data path (loads, stores, multiplies, adds, trig calls)
is what the execution counters measure.  All static accesses are bounds-
checked at build time; a negative or overflowing index is only legal inside
a SelectGuard that establishes its range.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from .errors import DspcError


class LoopIrError(DspcError):
    pass


class OutOfBounds(LoopIrError):
    def __init__(self, buffer: str, detail: str):
        super().__init__(f"buffer {buffer!r}: {detail}")
        self.buffer = buffer


@dataclass(frozen=True)
class AffineExpr:
    """const + sum(coeff * index) evaluated in exact integer arithmetic."""

    const: int = 0
    terms: tuple[tuple[str, int], ...] = ()

    @staticmethod
    def of(index: str, coeff: int = 1, const: int = 0) -> "AffineExpr":
        return AffineExpr(const=const, terms=((index, coeff),))

    @staticmethod
    def lit(const: int) -> "AffineExpr":
        return AffineExpr(const=const)

    def plus(self, other: "AffineExpr") -> "AffineExpr":
        coeffs: dict[str, int] = {}
        for name, c in self.terms + other.terms:
            coeffs[name] = coeffs.get(name, 0) + c
        terms = tuple(sorted((n, c) for n, c in coeffs.items() if c != 0))
        return AffineExpr(const=self.const + other.const, terms=terms)

    def minus(self, other: "AffineExpr") -> "AffineExpr":
        return self.plus(other.scaled(-1))

    def scaled(self, k: int) -> "AffineExpr":
        return AffineExpr(const=self.const * k,
                          terms=tuple((n, c * k) for n, c in self.terms))

    def shifted(self, k: int) -> "AffineExpr":
        return AffineExpr(const=self.const + k, terms=self.terms)

    @property
    def is_const(self) -> bool:
        return not self.terms

    def source(self) -> str:
        """Render as a Python/int expression string."""
        parts: list[str] = []
        for name, coeff in self.terms:
            if coeff == 1:
                parts.append(name)
            elif coeff == -1:
                parts.append(f"-{name}")
            else:
                parts.append(f"{coeff}*{name}")
        if self.const or not parts:
            parts.append(str(self.const))
        out = parts[0]
        for p in parts[1:]:
            out += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
        return out

    def __str__(self) -> str:
        return self.source()


# Float-valued operands ------------------------------------------------------


@dataclass(frozen=True)
class TempRef:
    name: str


@dataclass(frozen=True)
class ConstF:
    value: float


@dataclass(frozen=True)
class IndexF:
    """The value of an affine index expression used as float data."""

    expr: AffineExpr


@dataclass(frozen=True)
class IndexProdF:
    """Product of two loop indices as float data (exact below 2**53).

    Transform lowerings need k*n for the phase angle; the product itself is
    index arithmetic and is not metered.
    """

    a: str
    b: str


Operand = Union[TempRef, ConstF, IndexF, IndexProdF]


# Statements -----------------------------------------------------------------


@dataclass
class For:
    index: str
    lower: int
    upper: AffineExpr
    step: int
    body: list["Stmt"]
    tag: Optional[str] = None


@dataclass
class Load:
    target: str
    buffer: str
    index: AffineExpr


@dataclass
class Store:
    buffer: str
    index: AffineExpr
    source: Operand


@dataclass
class BinaryArith:
    target: str
    op: str  # add | sub | mul | div
    lhs: Operand
    rhs: Operand


@dataclass
class IntrinsicCall:
    target: str
    fn: str  # sin | cos | sinc_eval | abs | floor
    arg: Operand


@dataclass
class SetTemp:
    target: str
    source: Operand


@dataclass
class SelectGuard:
    """Boundary guard: run `body` when lower <= expr < upper, else `orelse`."""

    expr: AffineExpr
    lower: int
    upper: AffineExpr
    body: list["Stmt"]
    orelse: list["Stmt"] = field(default_factory=list)


@dataclass
class IfCmp:
    """Data-dependent branch on a float comparison."""

    cmp: str  # eq | ne | lt | le | gt | ge
    lhs: Operand
    rhs: Operand
    body: list["Stmt"]
    orelse: list["Stmt"] = field(default_factory=list)


@dataclass
class Select:
    """target = if_true if (lhs cmp rhs) else if_false."""

    target: str
    cmp: str
    lhs: Operand
    rhs: Operand
    if_true: Operand
    if_false: Operand


@dataclass
class DynAppend:
    buffer: str
    value: Operand


@dataclass
class CheckFinite:
    buffer: str


Stmt = Union[For, Load, Store, BinaryArith, IntrinsicCall, SetTemp, SelectGuard,
             IfCmp, Select, DynAppend, CheckFinite]


@dataclass(frozen=True)
class BufferDecl:
    name: str
    capacity: int
    init: Optional[tuple[float, ...]] = None  # data segment, e.g. constants
    dynamic: bool = False  # filled by DynAppend; logical length is the cursor


@dataclass
class LoopProgram:
    buffers: list[BufferDecl]
    body: list[Stmt]
    inputs: list[tuple[str, str]]  # (source-level input name, buffer name)
    outputs: list[tuple[int, str]]  # (ValueId printed, buffer name), in print order
    returns: list[tuple[int, str]] = field(default_factory=list)

    def buffer(self, name: str) -> BufferDecl:
        for b in self.buffers:
            if b.name == name:
                return b
        raise KeyError(name)


# Text form ------------------------------------------------------------------


_CMP_TEXT = {"eq": "==", "ne": "!=", "lt": "<", "le": "<=", "gt": ">", "ge": ">="}


def _operand_text(v: Operand) -> str:
    if isinstance(v, TempRef):
        return v.name
    if isinstance(v, ConstF):
        return repr(v.value)
    if isinstance(v, IndexF):
        return f"float({v.expr})"
    if isinstance(v, IndexProdF):
        return f"float({v.a}*{v.b})"
    raise TypeError(f"not an operand: {v!r}")


def _stmt_lines(stmt: Stmt, indent: int) -> list[str]:
    pad = "  " * indent
    if isinstance(stmt, For):
        tag = f" tag={stmt.tag}" if stmt.tag else ""
        step = f" step {stmt.step}" if stmt.step != 1 else ""
        lines = [f"{pad}for {stmt.index} in [{stmt.lower}, {stmt.upper}){step}{tag}:"]
        for s in stmt.body:
            lines.extend(_stmt_lines(s, indent + 1))
        return lines
    if isinstance(stmt, Load):
        return [f"{pad}{stmt.target} = load {stmt.buffer}[{stmt.index}]"]
    if isinstance(stmt, Store):
        return [f"{pad}store {stmt.buffer}[{stmt.index}] = {_operand_text(stmt.source)}"]
    if isinstance(stmt, BinaryArith):
        sym = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[stmt.op]
        return [f"{pad}{stmt.target} = {_operand_text(stmt.lhs)} {sym} "
                f"{_operand_text(stmt.rhs)}"]
    if isinstance(stmt, IntrinsicCall):
        return [f"{pad}{stmt.target} = {stmt.fn}({_operand_text(stmt.arg)})"]
    if isinstance(stmt, SetTemp):
        return [f"{pad}{stmt.target} = {_operand_text(stmt.source)}"]
    if isinstance(stmt, SelectGuard):
        lines = [f"{pad}if {stmt.lower} <= {stmt.expr} < {stmt.upper}:"]
        for s in stmt.body:
            lines.extend(_stmt_lines(s, indent + 1))
        if stmt.orelse:
            lines.append(f"{pad}else:")
            for s in stmt.orelse:
                lines.extend(_stmt_lines(s, indent + 1))
        return lines
    if isinstance(stmt, IfCmp):
        lines = [f"{pad}if {_operand_text(stmt.lhs)} {_CMP_TEXT[stmt.cmp]} "
                 f"{_operand_text(stmt.rhs)}:"]
        for s in stmt.body:
            lines.extend(_stmt_lines(s, indent + 1))
        if stmt.orelse:
            lines.append(f"{pad}else:")
            for s in stmt.orelse:
                lines.extend(_stmt_lines(s, indent + 1))
        return lines
    if isinstance(stmt, Select):
        return [f"{pad}{stmt.target} = {_operand_text(stmt.if_true)} if "
                f"{_operand_text(stmt.lhs)} {_CMP_TEXT[stmt.cmp]} "
                f"{_operand_text(stmt.rhs)} else {_operand_text(stmt.if_false)}"]
    if isinstance(stmt, DynAppend):
        return [f"{pad}append {stmt.buffer} <- {_operand_text(stmt.value)}"]
    if isinstance(stmt, CheckFinite):
        return [f"{pad}check_finite {stmt.buffer}"]
    raise TypeError(f"not a statement: {stmt!r}")


def loop_to_text(program: LoopProgram) -> str:
    lines: list[str] = []
    for b in program.buffers:
        decl = f"buffer {b.name}[{b.capacity}]"
        if b.dynamic:
            decl += " dyn"
        bound = {buf: name for name, buf in program.inputs}
        if b.name in bound:
            decl += f" input {bound[b.name]}"
        if b.init is not None:
            preview = ", ".join(repr(v) for v in b.init[:8])
            if len(b.init) > 8:
                preview += ", ..."
            decl += f" = [{preview}]"
        lines.append(decl)
    for stmt in program.body:
        lines.extend(_stmt_lines(stmt, 0))
    for vid, buf in program.outputs:
        lines.append(f"print %{vid} ({buf})")
    for vid, buf in program.returns:
        lines.append(f"return %{vid} ({buf})")
    return "\n".join(lines) + "\n"


# Static validation ----------------------------------------------------------


def _interval(expr: AffineExpr, ranges: dict[str, tuple[int, int]]) -> tuple[int, int]:
    lo = hi = expr.const
    for name, coeff in expr.terms:
        if name not in ranges:
            raise LoopIrError(f"index {name!r} used outside its loop")
        a, b = ranges[name]
        lo += min(coeff * a, coeff * b)
        hi += max(coeff * a, coeff * b)
    return lo, hi


def validate_program(program: LoopProgram) -> None:
    """Prove every static buffer access in bounds; raises OutOfBounds.

    Accesses under a SelectGuard whose guarded expression matches the access
    index are checked against the guard's range instead.
    """
    caps = {b.name: b.capacity for b in program.buffers}

    def check_block(stmts: Iterable[Stmt], ranges: dict[str, tuple[int, int]],
                    guards: dict[AffineExpr, tuple[int, int]]) -> None:
        for stmt in stmts:
            if isinstance(stmt, For):
                if stmt.step < 1:
                    raise LoopIrError(f"loop over {stmt.index} has step {stmt.step}")
                up_lo, up_hi = _interval(stmt.upper, ranges)
                if up_hi <= stmt.lower:
                    continue  # provably empty loop, body never executes
                sub = dict(ranges)
                sub[stmt.index] = (stmt.lower, up_hi - 1)
                check_block(stmt.body, sub, guards)
            elif isinstance(stmt, (Load, Store)):
                if stmt.buffer not in caps:
                    raise OutOfBounds(stmt.buffer, "unknown buffer")
                bound = guards.get(stmt.index)
                if bound is not None:
                    lo, hi = bound
                else:
                    lo, hi = _interval(stmt.index, ranges)
                if lo < 0 or hi >= caps[stmt.buffer]:
                    raise OutOfBounds(
                        stmt.buffer,
                        f"index {stmt.index} spans [{lo}, {hi}] outside "
                        f"[0, {caps[stmt.buffer]})")
            elif isinstance(stmt, SelectGuard):
                _up_lo, up_hi = _interval(stmt.upper, ranges)
                if (stmt.expr.const == 0 and len(stmt.expr.terms) == 1
                        and stmt.expr.terms[0][1] == 1):
                    # Guard on a bare loop index: narrow that index's range
                    # so any expression over it (e.g. a mirrored store at
                    # N-1-k) inherits the constraint.
                    name = stmt.expr.terms[0][0]
                    lo, hi = ranges.get(name, (stmt.lower, up_hi - 1))
                    narrowed = (max(lo, stmt.lower), min(hi, up_hi - 1))
                    if narrowed[0] <= narrowed[1]:
                        sub_r = dict(ranges)
                        sub_r[name] = narrowed
                        check_block(stmt.body, sub_r, guards)
                else:
                    sub = dict(guards)
                    sub[stmt.expr] = (stmt.lower, up_hi - 1)
                    check_block(stmt.body, ranges, sub)
                check_block(stmt.orelse, ranges, guards)
            elif isinstance(stmt, IfCmp):
                check_block(stmt.body, ranges, guards)
                check_block(stmt.orelse, ranges, guards)
            elif isinstance(stmt, DynAppend):
                if stmt.buffer not in caps:
                    raise OutOfBounds(stmt.buffer, "unknown buffer")

    check_block(program.body, {}, {})

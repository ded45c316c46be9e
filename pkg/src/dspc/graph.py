"""SSA graph of DSP operations.

Ops live in a topologically ordered list; every value is defined exactly once
and referenced only by later ops.  Shapes are static one-dimensional lengths,
except run-length encoding whose result carries a dynamic logical length
bounded by its buffer capacity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional

from . import frontend as fe
from .errors import DspcError
from .ops import BUILTINS, OPCODE_BY_NAME, SIGNATURES, AttrSpec, OpCode

ValueId = int


@dataclass(frozen=True)
class TensorShape:
    """Length of a rank-1 tensor; dynamic shapes bound a run-time length."""

    length: int
    dynamic: bool = False

    def __str__(self) -> str:
        return f"tensor<{self.length}{'?' if self.dynamic else ''}>"


@dataclass(frozen=True)
class Attribute:
    name: str
    value: object  # int | float | str | tuple[float, ...]


@dataclass(frozen=True)
class OpNode:
    """One operation; ``id`` is the ValueId of its first result.

    Print produces no result and uses id -1.  Dft1DFused is the only opcode
    with two results; its second result is addressed as ``id + 1``.
    """

    id: ValueId
    opcode: OpCode
    operands: tuple[ValueId, ...] = ()
    attributes: tuple[Attribute, ...] = ()
    result_shapes: tuple[Optional[TensorShape], ...] = ()

    def attr(self, name: str) -> object:
        for a in self.attributes:
            if a.name == name:
                return a.value
        raise KeyError(f"{self.opcode.value} has no attribute {name!r}")

    @property
    def n_results(self) -> int:
        return SIGNATURES[self.opcode].n_results

    @property
    def result_ids(self) -> tuple[ValueId, ...]:
        return tuple(self.id + i for i in range(self.n_results))


@dataclass
class DspGraph:
    ops: list[OpNode] = field(default_factory=list)
    inputs: list[tuple[str, ValueId]] = field(default_factory=list)
    prints: list[ValueId] = field(default_factory=list)
    returns: list[ValueId] = field(default_factory=list)

    def producer_map(self) -> dict[ValueId, OpNode]:
        out: dict[ValueId, OpNode] = {}
        for op in self.ops:
            for rid in op.result_ids:
                out[rid] = op
        return out

    def use_counts(self) -> dict[ValueId, int]:
        counts: dict[ValueId, int] = {}
        for op in self.ops:
            for v in op.operands:
                counts[v] = counts.get(v, 0) + 1
        for v in self.returns:
            counts[v] = counts.get(v, 0) + 1
        return counts

    def shape_of(self, value: ValueId) -> Optional[TensorShape]:
        op = self.producer_map().get(value)
        if op is None:
            return None
        idx = value - op.id
        if idx >= len(op.result_shapes):
            return None
        return op.result_shapes[idx]


class GraphBuildError(DspcError):
    def __init__(self, span: Optional[fe.SourceSpan], message: str):
        where = f"{span}: " if span is not None else ""
        super().__init__(f"{where}{message}")
        self.span = span


class UnknownBuiltin(GraphBuildError):
    def __init__(self, span, name: str):
        super().__init__(span, f"unknown builtin {name!r} (user-defined calls are not supported)")
        self.name = name


class ArityMismatch(GraphBuildError):
    def __init__(self, span, op: str, expected: int, got: int):
        super().__init__(span, f"{op} expects {expected} argument(s), got {got}")
        self.op = op
        self.expected = expected
        self.got = got


class UndefinedVariable(GraphBuildError):
    def __init__(self, span, name: str):
        super().__init__(span, f"undefined variable {name!r}")
        self.name = name


class BadAttribute(GraphBuildError):
    pass


class ShapeMismatch(DspcError):
    def __init__(self, op: OpNode, detail: str):
        super().__init__(f"%{op.id} {op.opcode.value}: {detail}")
        self.op = op
        self.detail = detail


class GraphTextError(DspcError):
    def __init__(self, line: int, column: int, message: str):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


class VerificationFailed(DspcError):
    """Raised by callers that treat a non-empty violation list as fatal."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


_BINOP_OPCODE = {"+": OpCode.ADD, "-": OpCode.SUB, "*": OpCode.MUL, "/": OpCode.DIV}


class _Builder:
    def __init__(self) -> None:
        self.graph = DspGraph()
        self.next_id: ValueId = 0
        self.env: dict[str, ValueId] = {}

    def emit(self, opcode: OpCode, operands: tuple[ValueId, ...] = (),
             attributes: tuple[Attribute, ...] = ()) -> ValueId:
        sig = SIGNATURES[opcode]
        op_id = self.next_id if sig.n_results > 0 else -1
        node = OpNode(id=op_id, opcode=opcode, operands=operands, attributes=attributes,
                      result_shapes=(None,) * sig.n_results)
        self.graph.ops.append(node)
        self.next_id += sig.n_results
        return op_id

    def build(self, module: fe.AstModule) -> DspGraph:
        main = module.main
        for param in main.params:
            vid = self.emit(OpCode.INPUT, attributes=(Attribute("name", param),))
            self.env[param] = vid
            self.graph.inputs.append((param, vid))
        for stmt in main.body:
            self.statement(stmt)
        return self.graph

    def statement(self, stmt: fe.AstStatement) -> None:
        if isinstance(stmt, fe.VarDecl):
            self.env[stmt.name] = self.expression(stmt.initializer)
        elif isinstance(stmt, fe.PrintStmt):
            value = self.expression(stmt.expr)
            self.emit(OpCode.PRINT, operands=(value,))
            self.graph.prints.append(value)
        elif isinstance(stmt, fe.ReturnStmt):
            if stmt.expr is not None:
                self.graph.returns.append(self.expression(stmt.expr))
        elif isinstance(stmt, fe.ExprStmt):
            self.expression(stmt.expr)
        else:
            raise TypeError(f"not a statement node: {stmt!r}")

    def expression(self, expr: fe.AstExpression) -> ValueId:
        if isinstance(expr, fe.NumberLiteral):
            return self.emit(OpCode.CONST_TENSOR,
                             attributes=(Attribute("values", (expr.value,)),))
        if isinstance(expr, fe.TensorLiteral):
            return self.emit(OpCode.CONST_TENSOR,
                             attributes=(Attribute("values", tuple(expr.values)),))
        if isinstance(expr, fe.VariableRef):
            if expr.name not in self.env:
                raise UndefinedVariable(expr.span, expr.name)
            return self.env[expr.name]
        if isinstance(expr, fe.BinaryOp):
            lhs = self.expression(expr.lhs)
            rhs = self.expression(expr.rhs)
            return self.emit(_BINOP_OPCODE[expr.op], operands=(lhs, rhs))
        if isinstance(expr, fe.Call):
            return self.call(expr)
        raise TypeError(f"not an expression node: {expr!r}")

    def call(self, expr: fe.Call) -> ValueId:
        opcode = BUILTINS.get(expr.callee)
        if opcode is None:
            raise UnknownBuiltin(expr.span, expr.callee)
        sig = SIGNATURES[opcode]
        expected = sig.n_operands + len(sig.attrs)
        if len(expr.args) != expected:
            raise ArityMismatch(expr.span, expr.callee, expected, len(expr.args))
        operands = tuple(self.expression(a) for a in expr.args[:sig.n_operands])
        attributes = []
        for spec, arg in zip(sig.attrs, expr.args[sig.n_operands:]):
            attributes.append(Attribute(spec.name, self._const_attr(spec, arg, expr.callee)))
        return self.emit(opcode, operands=operands, attributes=tuple(attributes))

    def _const_attr(self, spec: AttrSpec, arg: fe.AstExpression, callee: str) -> object:
        value = _fold_constant(arg)
        if value is None:
            raise BadAttribute(arg.span,
                               f"{callee} attribute {spec.name!r} must be a constant number")
        if spec.kind == "int":
            if value != int(value):
                raise BadAttribute(arg.span,
                                   f"{callee} attribute {spec.name!r} must be an integer, "
                                   f"got {value}")
            return int(value)
        return float(value)


def _fold_constant(expr: fe.AstExpression) -> Optional[float]:
    """Evaluate an attribute-position expression built from number literals."""
    if isinstance(expr, fe.NumberLiteral):
        return expr.value
    if isinstance(expr, fe.BinaryOp):
        lhs = _fold_constant(expr.lhs)
        rhs = _fold_constant(expr.rhs)
        if lhs is None or rhs is None:
            return None
        if expr.op == "+":
            return lhs + rhs
        if expr.op == "-":
            return lhs - rhs
        if expr.op == "*":
            return lhs * rhs
        if rhs == 0.0:
            return None
        return lhs / rhs
    return None


def build_graph(module: fe.AstModule) -> DspGraph:
    """Lower the AST of ``main`` into an SSA op graph (shapes unresolved)."""
    return _Builder().build(module)


# --------------------------------------------------------------------------
# Shape inference


def _broadcast(op: OpNode, a: TensorShape, b: TensorShape) -> TensorShape:
    if a.dynamic or b.dynamic:
        raise ShapeMismatch(op, "dynamic tensors cannot feed arithmetic ops")
    if a.length == b.length:
        return TensorShape(a.length)
    if a.length == 1:
        return TensorShape(b.length)
    if b.length == 1:
        return TensorShape(a.length)
    raise ShapeMismatch(op, f"operand lengths {a.length} and {b.length} do not broadcast")


def _require_static(op: OpNode, shape: TensorShape, what: str) -> TensorShape:
    if shape.dynamic:
        raise ShapeMismatch(op, f"{what} must have a static shape")
    return shape


def _infer_result_shapes(op: OpNode, ins: list[TensorShape]) -> tuple[TensorShape, ...]:
    oc = op.opcode
    if oc is OpCode.CONST_TENSOR:
        return (TensorShape(len(op.attr("values"))),)
    if oc in (OpCode.DELAY, OpCode.SLIDING_WINDOW_AVG, OpCode.SQUARE, OpCode.GAIN,
              OpCode.REVERSE, OpCode.THRESHOLD, OpCode.QUANTIZE,
              OpCode.DFT1D_REAL, OpCode.DFT1D_IMAG,
              OpCode.DFT1D_REAL_SYMM, OpCode.DFT1D_IMAG_SYMM):
        return (_require_static(op, ins[0], "operand"),)
    if oc in (OpCode.FIR_FILTER_RESPONSE, OpCode.FILTER_RES_SYMM_OPT):
        _require_static(op, ins[1], "coefficients")
        return (_require_static(op, ins[0], "signal"),)
    if oc is OpCode.CONV1D_FULL:
        n = _require_static(op, ins[0], "signal").length
        l = _require_static(op, ins[1], "kernel").length
        return (TensorShape(n + l - 1),)
    if oc is OpCode.FILTER_Y_SYMM_OPT:
        n = _require_static(op, ins[0], "signal").length
        return (TensorShape(2 * n - 1),)
    if oc is OpCode.IDFT1D:
        a = _require_static(op, ins[0], "real part")
        b = _require_static(op, ins[1], "imaginary part")
        if a.length != b.length:
            raise ShapeMismatch(op, f"real/imag lengths differ: {a.length} vs {b.length}")
        return (a,)
    if oc is OpCode.DFT1D_FUSED:
        s = _require_static(op, ins[0], "operand")
        return (s, s)
    if oc in (OpCode.LOW_PASS_FIR_COEFFS, OpCode.HAMMING_WINDOW, OpCode.FILTER_HAMM_OPT):
        return (TensorShape(int(op.attr("L"))),)
    if oc in (OpCode.LMS_FILTER, OpCode.LMS_FILTER_GAIN_OPT):
        a = _require_static(op, ins[0], "input")
        b = _require_static(op, ins[1], "desired signal")
        if a.length != b.length:
            raise ShapeMismatch(op, f"input/desired lengths differ: {a.length} vs {b.length}")
        return (TensorShape(int(op.attr("M"))),)
    if oc in (OpCode.ADD, OpCode.SUB, OpCode.MUL, OpCode.DIV):
        return (_broadcast(op, ins[0], ins[1]),)
    if oc is OpCode.SUM:
        _require_static(op, ins[0], "operand")
        return (TensorShape(1),)
    if oc is OpCode.RUN_LEN_ENCODING:
        n = _require_static(op, ins[0], "operand").length
        return (TensorShape(2 * n, dynamic=True),)
    if oc is OpCode.UPSAMPLE:
        n = _require_static(op, ins[0], "operand").length
        return (TensorShape(n * int(op.attr("k"))),)
    if oc is OpCode.DOWNSAMPLE:
        n = _require_static(op, ins[0], "operand").length
        return (TensorShape(math.ceil(n / int(op.attr("k")))),)
    if oc in (OpCode.SIN_VEC, OpCode.COS_VEC, OpCode.RANGE_VEC):
        return (TensorShape(int(op.attr("n"))),)
    if oc is OpCode.PRINT:
        return ()
    if oc is OpCode.INPUT:
        raise AssertionError("input shapes come from bindings")
    raise AssertionError(f"no shape rule for {oc.value}")


def infer_shapes(graph: DspGraph,
                 input_lengths: Optional[Mapping[str, int]] = None) -> DspGraph:
    """Return a copy of the graph with result shapes resolved.

    Input shapes come from ``input_lengths`` (or stay unknown, leaving every
    dependent shape unknown as well).  Re-running is idempotent; a binding
    that contradicts an already-resolved input raises ShapeMismatch.
    """
    bindings = dict(input_lengths or {})
    shapes: dict[ValueId, Optional[TensorShape]] = {}
    new_ops: list[OpNode] = []
    input_names = dict(graph.inputs)
    name_by_id = {vid: name for name, vid in graph.inputs}

    for op in graph.ops:
        if op.opcode is OpCode.INPUT:
            existing = op.result_shapes[0] if op.result_shapes else None
            bound = bindings.get(name_by_id.get(op.id, op.attr("name")))
            if bound is not None:
                if existing is not None and existing.length != bound:
                    raise ShapeMismatch(op, f"input bound to length {bound} but already "
                                            f"shaped {existing.length}")
                resolved: Optional[TensorShape] = TensorShape(int(bound))
            else:
                resolved = existing
            shaped = (resolved,)
        else:
            ins: list[Optional[TensorShape]] = [shapes.get(v) for v in op.operands]
            if any(s is None for s in ins) and op.opcode is not OpCode.PRINT \
                    and SIGNATURES[op.opcode].n_operands > 0:
                shaped = (None,) * SIGNATURES[op.opcode].n_results
            else:
                shaped = _infer_result_shapes(op, [s for s in ins if s is not None]
                                              if op.operands else [])
        new_op = replace(op, result_shapes=shaped)
        new_ops.append(new_op)
        for rid, s in zip(new_op.result_ids, shaped):
            shapes[rid] = s
    del input_names
    return DspGraph(ops=new_ops, inputs=list(graph.inputs),
                    prints=list(graph.prints), returns=list(graph.returns))


# --------------------------------------------------------------------------
# Verification


def verify_graph(graph: DspGraph) -> list[str]:
    """Check structural and range invariants; returns violations, never raises."""
    violations: list[str] = []
    defined: set[ValueId] = set()
    for op in graph.ops:
        sig = SIGNATURES.get(op.opcode)
        label = f"%{op.id} {op.opcode.value}"
        if sig is None:
            violations.append(f"{label}: unknown opcode")
            continue
        for v in op.operands:
            if v not in defined:
                violations.append(f"{label}: operand %{v} not defined before use")
        if len(op.operands) != sig.n_operands:
            violations.append(f"{label}: expects {sig.n_operands} operand(s), "
                              f"has {len(op.operands)}")
        attr_names = [a.name for a in op.attributes]
        spec_names = [s.name for s in sig.attrs]
        if attr_names != spec_names:
            violations.append(f"{label}: attributes {attr_names} != schema {spec_names}")
        else:
            values: dict[str, object] = {}
            for spec, a in zip(sig.attrs, op.attributes):
                values[spec.name] = a.value
                if not _attr_type_ok(spec, a.value):
                    violations.append(f"{label}: attribute {spec.name!r} has wrong type")
                elif not spec.ok(a.value):
                    violations.append(f"{label}: attribute {spec.name}={a.value!r} "
                                      f"violates {spec.legal}")
            if sig.cross_check is not None and len(values) == len(sig.attrs):
                msg = sig.cross_check(values)
                if msg:
                    violations.append(f"{label}: {msg}")
        if len(op.result_shapes) != sig.n_results:
            violations.append(f"{label}: has {len(op.result_shapes)} result shape slot(s), "
                              f"schema says {sig.n_results}")
        if sig.n_results == 0 and op.id != -1:
            violations.append(f"{label}: resultless op must use id -1")
        for rid in op.result_ids:
            if sig.n_results and rid in defined:
                violations.append(f"{label}: value %{rid} defined more than once")
            defined.add(rid)
        violations.extend(_check_shapes(graph, op))
    for name, vid in graph.inputs:
        if vid not in defined:
            violations.append(f"input {name!r} refers to undefined value %{vid}")
    for vid in graph.prints:
        if vid not in defined:
            violations.append(f"print refers to undefined value %{vid}")
    for vid in graph.returns:
        if vid not in defined:
            violations.append(f"return refers to undefined value %{vid}")
    return violations


def _attr_type_ok(spec: AttrSpec, value: object) -> bool:
    if spec.kind == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if spec.kind == "float":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if spec.kind == "float_list":
        return isinstance(value, tuple) and all(isinstance(v, (int, float)) for v in value)
    if spec.kind == "str":
        return isinstance(value, str)
    return False


def _check_shapes(graph: DspGraph, op: OpNode) -> list[str]:
    """Re-derive result shapes where operand shapes are known and compare."""
    if op.opcode in (OpCode.INPUT, OpCode.PRINT):
        return []
    producer = graph.producer_map()
    ins: list[Optional[TensorShape]] = []
    for v in op.operands:
        p = producer.get(v)
        ins.append(None if p is None else p.result_shapes[v - p.id]
                   if v - p.id < len(p.result_shapes) else None)
    if any(s is None for s in ins):
        return []
    if any(s is None for s in op.result_shapes):
        return []
    try:
        expected = _infer_result_shapes(op, [s for s in ins if s is not None])
    except ShapeMismatch as exc:
        return [str(exc)]
    except Exception:
        return []
    if tuple(op.result_shapes) != expected:
        return [f"%{op.id} {op.opcode.value}: result shapes {tuple(map(str, op.result_shapes))} "
                f"inconsistent, expected {tuple(map(str, expected))}"]
    return []


# --------------------------------------------------------------------------
# Textual form


def _format_attr_value(value: object) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        raise TypeError("boolean attribute")
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return "[" + ", ".join(_format_list_elem(v) for v in value) + "]"
    raise TypeError(f"unsupported attribute value {value!r}")


def _format_list_elem(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _format_shape(shape: Optional[TensorShape]) -> str:
    if shape is None:
        return "tensor<?>"
    return str(shape)


def graph_to_text(graph: DspGraph) -> str:
    """One op per line: ``%id = opcode(%a, %b) {attr=value} : tensor<shape>``."""
    lines: list[str] = []
    for op in graph.ops:
        args = ", ".join(f"%{v}" for v in op.operands)
        if op.opcode is OpCode.PRINT:
            lines.append(f"print({args})")
            continue
        heads = ", ".join(f"%{r}" for r in op.result_ids)
        text = f"{heads} = {op.opcode.value}({args})"
        if op.attributes:
            attrs = ", ".join(f"{a.name}={_format_attr_value(a.value)}" for a in op.attributes)
            text += f" {{{attrs}}}"
        shapes = ", ".join(_format_shape(s) for s in op.result_shapes)
        text += f" : {shapes}"
        lines.append(text)
    for vid in graph.returns:
        lines.append(f"return %{vid}")
    return "\n".join(lines) + "\n"


class _LineScanner:
    def __init__(self, text: str, line_no: int):
        self.text = text
        self.pos = 0
        self.line_no = line_no

    def error(self, message: str) -> GraphTextError:
        return GraphTextError(self.line_no, self.pos + 1, message)

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self, literal: str) -> bool:
        self.skip_ws()
        if self.text.startswith(literal, self.pos):
            self.pos += len(literal)
            return True
        return False

    def expect(self, literal: str) -> None:
        if not self.take(literal):
            raise self.error(f"expected {literal!r}")

    def ident(self) -> str:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isalnum()
                                             or self.text[self.pos] == "_"):
            self.pos += 1
        if self.pos == start:
            raise self.error("expected an identifier")
        return self.text[start:self.pos]

    def value_id(self) -> ValueId:
        self.expect("%")
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
        if self.pos == start:
            raise self.error("expected a value id")
        return int(self.text[start:self.pos])

    def number(self) -> float:
        self.skip_ws()
        start = self.pos
        if self.pos < len(self.text) and self.text[self.pos] in "+-":
            self.pos += 1
        while self.pos < len(self.text) and (self.text[self.pos].isdigit()
                                             or self.text[self.pos] in ".eE+-"):
            if self.text[self.pos] in "+-" and self.text[self.pos - 1] not in "eE":
                break
            self.pos += 1
        token = self.text[start:self.pos]
        try:
            return float(token)
        except ValueError:
            raise self.error(f"bad number {token!r}") from None

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)


def _parse_attr_value(scanner: _LineScanner, spec: AttrSpec) -> object:
    if spec.kind == "int":
        v = scanner.number()
        if v != int(v):
            raise scanner.error(f"attribute {spec.name!r} must be an integer")
        return int(v)
    if spec.kind == "float":
        return float(scanner.number())
    if spec.kind == "float_list":
        scanner.expect("[")
        values = [scanner.number()]
        while scanner.take(","):
            values.append(scanner.number())
        scanner.expect("]")
        return tuple(float(v) for v in values)
    if spec.kind == "str":
        return scanner.ident()
    raise AssertionError(spec.kind)


def _parse_shape(scanner: _LineScanner) -> Optional[TensorShape]:
    scanner.expect("tensor<")
    if scanner.take("?>"):
        return None
    start = scanner.pos
    while scanner.pos < len(scanner.text) and scanner.text[scanner.pos].isdigit():
        scanner.pos += 1
    if scanner.pos == start:
        raise scanner.error("expected a tensor length")
    length = int(scanner.text[start:scanner.pos])
    dynamic = scanner.take("?")
    scanner.expect(">")
    return TensorShape(length, dynamic=dynamic)


def parse_graph_text(text: str) -> DspGraph:
    """Parse the output of graph_to_text back into a DspGraph."""
    graph = DspGraph()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        sc = _LineScanner(line, line_no)
        if sc.take("print("):
            vid = sc.value_id()
            sc.expect(")")
            graph.ops.append(OpNode(id=-1, opcode=OpCode.PRINT, operands=(vid,),
                                    result_shapes=()))
            graph.prints.append(vid)
            continue
        if sc.take("return"):
            graph.returns.append(sc.value_id())
            continue
        first = sc.value_id()
        ids = [first]
        while sc.take(","):
            ids.append(sc.value_id())
        sc.expect("=")
        name = sc.ident()
        opcode = OPCODE_BY_NAME.get(name)
        if opcode is None or opcode is OpCode.PRINT:
            raise sc.error(f"unknown opcode {name!r}")
        sig = SIGNATURES[opcode]
        if len(ids) != sig.n_results:
            raise sc.error(f"{name} defines {sig.n_results} result(s), line has {len(ids)}")
        if ids != [first + i for i in range(len(ids))]:
            raise sc.error("multi-result ids must be consecutive")
        sc.expect("(")
        operands: list[ValueId] = []
        if not sc.take(")"):
            operands.append(sc.value_id())
            while sc.take(","):
                operands.append(sc.value_id())
            sc.expect(")")
        raw_attrs: dict[str, object] = {}
        if sc.take("{"):
            while True:
                attr_name = sc.ident()
                sc.expect("=")
                try:
                    spec = sig.attr_spec(attr_name)
                except KeyError:
                    raise sc.error(f"{name} has no attribute {attr_name!r}") from None
                raw_attrs[attr_name] = _parse_attr_value(sc, spec)
                if sc.take("}"):
                    break
                sc.expect(",")
        missing = [s.name for s in sig.attrs if s.name not in raw_attrs]
        if missing:
            raise sc.error(f"{name} missing attribute(s) {missing}")
        shapes: list[Optional[TensorShape]] = []
        if sc.take(":"):
            shapes.append(_parse_shape(sc))
            while sc.take(","):
                shapes.append(_parse_shape(sc))
        else:
            shapes = [None] * sig.n_results
        if len(shapes) != sig.n_results:
            raise sc.error(f"{name} needs {sig.n_results} shape(s), line has {len(shapes)}")
        if not sc.at_end():
            raise sc.error("trailing text after op")
        attributes = tuple(Attribute(s.name, raw_attrs[s.name]) for s in sig.attrs)
        node = OpNode(id=first, opcode=opcode, operands=tuple(operands),
                      attributes=attributes, result_shapes=tuple(shapes))
        graph.ops.append(node)
        if opcode is OpCode.INPUT:
            graph.inputs.append((str(node.attr("name")), node.id))
    return graph


# --------------------------------------------------------------------------
# Shared helpers used by the rewriter and lowering


def renumber(graph: DspGraph) -> DspGraph:
    """Assign dense ValueIds in list order, keeping multi-result ids adjacent."""
    mapping: dict[ValueId, ValueId] = {}
    next_id = 0
    staged: list[tuple[OpNode, ValueId]] = []
    for op in graph.ops:
        if op.n_results == 0:
            staged.append((op, -1))
            continue
        staged.append((op, next_id))
        for i, rid in enumerate(op.result_ids):
            mapping[rid] = next_id + i
        next_id += op.n_results
    new_ops = [replace(op, id=new_id, operands=tuple(mapping[v] for v in op.operands))
               for op, new_id in staged]
    return DspGraph(
        ops=new_ops,
        inputs=[(name, mapping[v]) for name, v in graph.inputs],
        prints=[mapping[v] for v in graph.prints],
        returns=[mapping[v] for v in graph.returns],
    )


def eliminate_dead_ops(graph: DspGraph) -> DspGraph:
    """Drop ops whose results are unused; prints, returns, and inputs stay."""
    producer = graph.producer_map()
    live: set[ValueId] = set()
    work: list[ValueId] = list(graph.prints) + list(graph.returns)
    keep_ops: set[int] = set()
    for idx, op in enumerate(graph.ops):
        if op.opcode in (OpCode.PRINT, OpCode.INPUT):
            keep_ops.add(idx)
            work.extend(op.operands)
    while work:
        v = work.pop()
        if v in live:
            continue
        live.add(v)
        p = producer.get(v)
        if p is not None:
            work.extend(p.operands)
    new_ops = []
    for idx, op in enumerate(graph.ops):
        if idx in keep_ops or any(r in live for r in op.result_ids):
            new_ops.append(op)
    pruned = DspGraph(ops=new_ops, inputs=list(graph.inputs),
                      prints=list(graph.prints), returns=list(graph.returns))
    return renumber(pruned)

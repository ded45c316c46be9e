"""Lowering from the op graph to explicit loop nests.

Each opcode gets a dedicated emitter that transcribes its defining recurrence
into loads, stores and scalar arithmetic, preserving the reference kernels'
accumulation order so both routes agree to the last bit wherever rounding
allows.  Cost-model conventions baked in here:

* filter taps are loaded unconditionally in the inner loop; only the signal
  load and the accumulate sit behind the boundary guard,
* transform phase angles are ``c * (k*n)`` with ``c = 2*pi/N`` folded at
  lowering time, so one multiply per inner iteration buys the angle,
* mirrored producers (symmetric taps, conjugate-symmetric spectra) compute
  the first half and store each value twice, skipping the middle duplicate,
* index arithmetic, comparisons, ``abs`` and ``floor`` are free.
"""

from __future__ import annotations

import math
from typing import Optional

from .errors import DspcError
from .graph import DspGraph, OpNode
from .loop_ir import (AffineExpr, BinaryArith, BufferDecl, CheckFinite,
                      ConstF, DynAppend, For, IfCmp, IndexF, IndexProdF,
                      IntrinsicCall, Load, LoopProgram, Select, SelectGuard,
                      SetTemp, Stmt, Store, TempRef, validate_program)
from .ops import OpCode


class LoweringUnsupported(DspcError):
    """An op reached the backend without an emitter or a static shape.

    The graph builder and the rewriter only produce lowerable ops, so user
    programs should never trip this.
    """


def _af(index: str, coeff: int = 1, const: int = 0) -> AffineExpr:
    return AffineExpr.of(index, coeff, const)


def _lit(v: int) -> AffineExpr:
    return AffineExpr.lit(v)


class _Lowerer:
    def __init__(self, graph: DspGraph):
        self.graph = graph
        self.buffers: list[BufferDecl] = []
        self.body: list[Stmt] = []
        self.inputs: list[tuple[str, str]] = []
        self._temp_seq = 0
        self._lengths: dict[int, int] = {}
        self._dynamic: dict[int, bool] = {}

    # -- small helpers ------------------------------------------------------

    def t(self) -> str:
        self._temp_seq += 1
        return f"t{self._temp_seq}"

    def buf(self, vid: int) -> str:
        return f"v{vid}"

    def length(self, vid: int) -> int:
        return self._lengths[vid]

    def declare(self, op: OpNode) -> None:
        """Register result buffers (and lengths) for an op."""
        for rid, shape in zip(op.result_ids, op.result_shapes):
            if shape.length is None:
                raise LoweringUnsupported(
                    f"op %{op.id} ({op.opcode.value}) has an unresolved "
                    "shape; bind all inputs before lowering")
            init: Optional[tuple[float, ...]] = None
            if op.opcode is OpCode.CONST_TENSOR:
                init = tuple(float(v) for v in op.attr("values"))
            self.buffers.append(BufferDecl(self.buf(rid), shape.length,
                                           init=init, dynamic=shape.dynamic))
            self._lengths[rid] = shape.length
            self._dynamic[rid] = shape.dynamic

    def operand_len(self, op: OpNode, slot: int) -> int:
        vid = op.operands[slot]
        if self._dynamic.get(vid):
            raise LoweringUnsupported(
                f"op %{op.id} ({op.opcode.value}) consumes a dynamic tensor")
        return self._lengths[vid]

    # -- shared loop shapes --------------------------------------------------

    def copy_loop(self, op: OpNode, src_index_of, n: int, tag: str,
                  transform) -> None:
        """``for i in [0, n): out[i] = f(load src[src_index_of(i)])``."""
        i = f"i{op.id}"
        tv = self.t()
        body: list[Stmt] = [Load(tv, self.buf(op.operands[0]),
                                 src_index_of(i))]
        body.extend(transform(i, tv))
        self.body.append(For(i, 0, _lit(n), 1, body, tag=tag))

    def guarded_mac(self, n_idx: str, i_idx: str, x_buf: str, x_len: int,
                    tap: str, acc: str, offset: int = 0,
                    i_coeff: int = -1) -> Stmt:
        """Guarded ``acc += tap * x[n + i_coeff*i + offset]``."""
        at = _af(n_idx).plus(_af(i_idx, i_coeff)).shifted(offset)
        tx, tm = self.t(), self.t()
        return SelectGuard(at, 0, _lit(x_len), body=[
            Load(tx, x_buf, at),
            BinaryArith(tm, "mul", TempRef(tap), TempRef(tx)),
            BinaryArith(acc, "add", TempRef(acc), TempRef(tm)),
        ])

    # -- emitters ------------------------------------------------------------

    def emit(self, op: OpNode) -> None:
        oc = op.opcode
        if oc is OpCode.PRINT:
            return
        self.declare(op)
        emitter = _EMITTERS.get(oc)
        if emitter is None:
            raise LoweringUnsupported(f"no emitter for opcode {oc.value}")
        emitter(self, op)


def _e_input(lw: _Lowerer, op: OpNode) -> None:
    lw.inputs.append((str(op.attr("name")), lw.buf(op.id)))


def _e_const(lw: _Lowerer, op: OpNode) -> None:
    pass  # data segment only


def _e_delay(lw: _Lowerer, op: OpNode) -> None:
    n = lw.length(op.id)
    k = int(op.attr("k"))
    x = lw.buf(op.operands[0])
    out = lw.buf(op.id)
    i = f"i{op.id}"
    tv = lw.t()
    if k == 0:
        body: list[Stmt] = [Load(tv, x, _af(i)), Store(out, _af(i), TempRef(tv))]
    else:
        at = _af(i, const=-k)
        body = [SelectGuard(at, 0, _lit(n),
                            body=[Load(tv, x, at), Store(out, _af(i), TempRef(tv))],
                            orelse=[Store(out, _af(i), ConstF(0.0))])]
    lw.body.append(For(i, 0, _lit(n), 1, body, tag="delay"))


def _fir_nest(lw: _Lowerer, op: OpNode, n_out: int) -> None:
    """Shared shape of firFilterResponse / conv1d: taps loaded every step."""
    x, h = lw.buf(op.operands[0]), lw.buf(op.operands[1])
    n_x = lw.operand_len(op, 0)
    n_h = lw.operand_len(op, 1)
    out = lw.buf(op.id)
    tag = op.opcode.value
    n_i, i_i = f"i{op.id}", f"j{op.id}"
    acc, th = lw.t(), lw.t()
    inner: list[Stmt] = [
        Load(th, h, _af(i_i)),
        lw.guarded_mac(n_i, i_i, x, n_x, th, acc),
    ]
    body: list[Stmt] = [
        SetTemp(acc, ConstF(0.0)),
        For(i_i, 0, _lit(n_h), 1, inner, tag=f"{tag}.inner"),
        Store(out, _af(n_i), TempRef(acc)),
    ]
    lw.body.append(For(n_i, 0, _lit(n_out), 1, body, tag=f"{tag}.outer"))


def _e_fir_response(lw: _Lowerer, op: OpNode) -> None:
    _fir_nest(lw, op, lw.length(op.id))


def _e_conv_full(lw: _Lowerer, op: OpNode) -> None:
    _fir_nest(lw, op, lw.length(op.id))


def _e_sliding_avg(lw: _Lowerer, op: OpNode) -> None:
    n = lw.length(op.id)
    w = int(op.attr("window"))
    x, out = lw.buf(op.operands[0]), lw.buf(op.id)
    n_i, i_i = f"i{op.id}", f"j{op.id}"
    acc, tx, tq = lw.t(), lw.t(), lw.t()
    at = _af(n_i).plus(_af(i_i, -1))
    inner: list[Stmt] = [SelectGuard(at, 0, _lit(n), body=[
        Load(tx, x, at),
        BinaryArith(acc, "add", TempRef(acc), TempRef(tx)),
    ])]
    body: list[Stmt] = [
        SetTemp(acc, ConstF(0.0)),
        For(i_i, 0, _lit(w), 1, inner, tag="sliding_window_avg.inner"),
        BinaryArith(tq, "div", TempRef(acc), ConstF(float(w))),
        Store(out, _af(n_i), TempRef(tq)),
    ]
    lw.body.append(For(n_i, 0, _lit(n), 1, body, tag="sliding_window_avg.outer"))


def _dft_nest(lw: _Lowerer, op: OpNode, *, trig: str, sign: str,
              half: bool) -> None:
    """One real or imaginary DFT accumulator, optionally mirrored."""
    n = lw.operand_len(op, 0)
    x, out = lw.buf(op.operands[0]), lw.buf(op.id)
    tag = op.opcode.value
    c1 = 2.0 * math.pi / n
    k_i, n_i = f"i{op.id}", f"j{op.id}"
    acc, tx, ang, tc, tm = lw.t(), lw.t(), lw.t(), lw.t(), lw.t()
    inner: list[Stmt] = [
        Load(tx, x, _af(n_i)),
        BinaryArith(ang, "mul", ConstF(c1), IndexProdF(k_i, n_i)),
        IntrinsicCall(tc, trig, TempRef(ang)),
        BinaryArith(tm, "mul", TempRef(tx), TempRef(tc)),
        BinaryArith(acc, sign, TempRef(acc), TempRef(tm)),
    ]
    outer_n = n // 2 + 1 if half else n
    body: list[Stmt] = [
        SetTemp(acc, ConstF(0.0)),
        For(n_i, 0, _lit(n), 1, inner, tag=f"{tag}.inner"),
        Store(out, _af(k_i), TempRef(acc)),
    ]
    if half:
        mirror: list[Stmt]
        if sign == "add":  # real part: X[N-k] = X[k]
            mirror = [Store(out, _af(k_i, -1, n), TempRef(acc))]
        else:  # imaginary part: X[N-k] = -X[k]
            tn = lw.t()
            mirror = [BinaryArith(tn, "sub", ConstF(0.0), TempRef(acc)),
                      Store(out, _af(k_i, -1, n), TempRef(tn))]
        body.append(SelectGuard(_af(k_i), 1, _lit((n + 1) // 2), body=mirror))
    lw.body.append(For(k_i, 0, _lit(outer_n), 1, body, tag=f"{tag}.outer"))


def _e_dft_real(lw: _Lowerer, op: OpNode) -> None:
    _dft_nest(lw, op, trig="cos", sign="add", half=False)


def _e_dft_imag(lw: _Lowerer, op: OpNode) -> None:
    _dft_nest(lw, op, trig="sin", sign="sub", half=False)


def _e_dft_real_symm(lw: _Lowerer, op: OpNode) -> None:
    _dft_nest(lw, op, trig="cos", sign="add", half=True)


def _e_dft_imag_symm(lw: _Lowerer, op: OpNode) -> None:
    _dft_nest(lw, op, trig="sin", sign="sub", half=True)


def _e_idft(lw: _Lowerer, op: OpNode) -> None:
    n = lw.length(op.id)
    xr, xi = lw.buf(op.operands[0]), lw.buf(op.operands[1])
    out = lw.buf(op.id)
    c1 = 2.0 * math.pi / n
    n_i, k_i = f"i{op.id}", f"j{op.id}"
    acc, tr, ang, tc, tm1, ti, ts, tm2, tq = (lw.t() for _ in range(9))
    inner: list[Stmt] = [
        Load(tr, xr, _af(k_i)),
        BinaryArith(ang, "mul", ConstF(c1), IndexProdF(n_i, k_i)),
        IntrinsicCall(tc, "cos", TempRef(ang)),
        BinaryArith(tm1, "mul", TempRef(tr), TempRef(tc)),
        BinaryArith(acc, "add", TempRef(acc), TempRef(tm1)),
        Load(ti, xi, _af(k_i)),
        IntrinsicCall(ts, "sin", TempRef(ang)),
        BinaryArith(tm2, "mul", TempRef(ti), TempRef(ts)),
        BinaryArith(acc, "sub", TempRef(acc), TempRef(tm2)),
    ]
    body: list[Stmt] = [
        SetTemp(acc, ConstF(0.0)),
        For(k_i, 0, _lit(n), 1, inner, tag="idft1d.inner"),
        BinaryArith(tq, "div", TempRef(acc), ConstF(float(n))),
        Store(out, _af(n_i), TempRef(tq)),
    ]
    lw.body.append(For(n_i, 0, _lit(n), 1, body, tag="idft1d.outer"))


def _e_dft_fused(lw: _Lowerer, op: OpNode) -> None:
    n = lw.operand_len(op, 0)
    x = lw.buf(op.operands[0])
    out_r, out_i = lw.buf(op.result_ids[0]), lw.buf(op.result_ids[1])
    c1 = 2.0 * math.pi / n
    k_i, n_i = f"i{op.id}", f"j{op.id}"
    ar, ai, tx, ang, tc, tmr, ts, tmi = (lw.t() for _ in range(8))
    inner: list[Stmt] = [
        Load(tx, x, _af(n_i)),
        BinaryArith(ang, "mul", ConstF(c1), IndexProdF(k_i, n_i)),
        IntrinsicCall(tc, "cos", TempRef(ang)),
        BinaryArith(tmr, "mul", TempRef(tx), TempRef(tc)),
        BinaryArith(ar, "add", TempRef(ar), TempRef(tmr)),
        IntrinsicCall(ts, "sin", TempRef(ang)),
        BinaryArith(tmi, "mul", TempRef(tx), TempRef(ts)),
        BinaryArith(ai, "sub", TempRef(ai), TempRef(tmi)),
    ]
    body: list[Stmt] = [
        SetTemp(ar, ConstF(0.0)),
        SetTemp(ai, ConstF(0.0)),
        For(n_i, 0, _lit(n), 1, inner, tag="dft1d_fused.inner"),
        Store(out_r, _af(k_i), TempRef(ar)),
        Store(out_i, _af(k_i), TempRef(ai)),
    ]
    lw.body.append(For(k_i, 0, _lit(n), 1, body, tag="dft1d_fused.outer"))


def _lowpass_tap(lw: _Lowerer, n_i: str, L: int, wc: float, lp: str
                 ) -> list[Stmt]:
    """lp = (wc/pi) * sinc(wc * (n - (L-1)/2)), midpoint guarded when L odd."""
    scale = wc / math.pi
    mid = (L - 1) / 2.0
    td, z, s = lw.t(), lw.t(), lw.t()
    calc: list[Stmt] = [
        BinaryArith(td, "sub", IndexF(_af(n_i)), ConstF(mid)),
        BinaryArith(z, "mul", ConstF(wc), TempRef(td)),
        IntrinsicCall(s, "sinc_eval", TempRef(z)),
        BinaryArith(lp, "mul", ConstF(scale), TempRef(s)),
    ]
    if L % 2 == 1:
        midi = (L - 1) // 2
        return [SelectGuard(_af(n_i), midi, _lit(midi + 1),
                            body=[SetTemp(lp, ConstF(scale))], orelse=calc)]
    return calc


def _hamming_tap(lw: _Lowerer, n_i: str, L: int, hw: str) -> list[Stmt]:
    """hw = 0.54 - 0.46 * cos(2*pi*n/(L-1))."""
    c2 = 2.0 * math.pi / (L - 1)
    ta, tc, tm = lw.t(), lw.t(), lw.t()
    return [
        BinaryArith(ta, "mul", ConstF(c2), IndexF(_af(n_i))),
        IntrinsicCall(tc, "cos", TempRef(ta)),
        BinaryArith(tm, "mul", ConstF(0.46), TempRef(tc)),
        BinaryArith(hw, "sub", ConstF(0.54), TempRef(tm)),
    ]


def _e_lowpass(lw: _Lowerer, op: OpNode) -> None:
    L = int(op.attr("L"))
    wc = float(op.attr("wc"))
    out = lw.buf(op.id)
    n_i = f"i{op.id}"
    lp = lw.t()
    body = _lowpass_tap(lw, n_i, L, wc, lp)
    body.append(Store(out, _af(n_i), TempRef(lp)))
    lw.body.append(For(n_i, 0, _lit(L), 1, body, tag="low_pass_fir_coeffs"))


def _e_hamming(lw: _Lowerer, op: OpNode) -> None:
    L = int(op.attr("L"))
    out = lw.buf(op.id)
    n_i = f"i{op.id}"
    hw = lw.t()
    body = _hamming_tap(lw, n_i, L, hw)
    body.append(Store(out, _af(n_i), TempRef(hw)))
    lw.body.append(For(n_i, 0, _lit(L), 1, body, tag="hamming_window"))


def _e_filter_hamm_opt(lw: _Lowerer, op: OpNode) -> None:
    L = int(op.attr("L"))
    wc = float(op.attr("wc"))
    out = lw.buf(op.id)
    n_i = f"i{op.id}"
    lp, hw, hv = lw.t(), lw.t(), lw.t()
    body = _lowpass_tap(lw, n_i, L, wc, lp)
    body.extend(_hamming_tap(lw, n_i, L, hw))
    body.append(BinaryArith(hv, "mul", TempRef(lp), TempRef(hw)))
    body.append(Store(out, _af(n_i), TempRef(hv)))
    # mirrored tap; the middle of an odd-length window is stored once
    body.append(SelectGuard(_af(n_i), 0, _lit(L // 2),
                            body=[Store(out, _af(n_i, -1, L - 1), TempRef(hv))]))
    half = (L + 1) // 2
    lw.body.append(For(n_i, 0, _lit(half), 1, body, tag="filter_hamm_opt"))


def _e_filter_res_symm(lw: _Lowerer, op: OpNode) -> None:
    x, h = lw.buf(op.operands[0]), lw.buf(op.operands[1])
    n_x = lw.operand_len(op, 0)
    L = lw.operand_len(op, 1)
    out = lw.buf(op.id)
    n_i, i_i = f"i{op.id}", f"j{op.id}"
    acc, th, tp, tm = lw.t(), lw.t(), lw.t(), lw.t()
    at_lo = _af(n_i).plus(_af(i_i, -1))                    # n - i
    at_hi = _af(n_i).plus(_af(i_i, 1)).shifted(-(L - 1))   # n - (L-1-i)
    tx1, tx2 = lw.t(), lw.t()
    inner: list[Stmt] = [
        Load(th, h, _af(i_i)),
        SetTemp(tp, ConstF(0.0)),
        SelectGuard(at_lo, 0, _lit(n_x), body=[
            Load(tx1, x, at_lo),
            BinaryArith(tp, "add", TempRef(tp), TempRef(tx1)),
        ]),
        SelectGuard(at_hi, 0, _lit(n_x), body=[
            Load(tx2, x, at_hi),
            BinaryArith(tp, "add", TempRef(tp), TempRef(tx2)),
        ]),
        BinaryArith(tm, "mul", TempRef(th), TempRef(tp)),
        BinaryArith(acc, "add", TempRef(acc), TempRef(tm)),
    ]
    body: list[Stmt] = [
        SetTemp(acc, ConstF(0.0)),
        For(i_i, 0, _lit(L // 2), 1, inner, tag="filter_res_symm_opt.inner"),
    ]
    if L % 2 == 1:
        midi = (L - 1) // 2
        th2 = lw.t()
        body.append(Load(th2, h, _lit(midi)))
        body.append(lw.guarded_mac(n_i, i_i, x, n_x, th2, acc,
                                   offset=-midi, i_coeff=0))
    body.append(Store(out, _af(n_i), TempRef(acc)))
    lw.body.append(For(n_i, 0, _lit(lw.length(op.id)), 1, body,
                       tag="filter_res_symm_opt.outer"))


def _e_filter_y_symm(lw: _Lowerer, op: OpNode) -> None:
    x = lw.buf(op.operands[0])
    n = lw.operand_len(op, 0)
    n_out = 2 * n - 1
    out = lw.buf(op.id)
    n_i, i_i = f"i{op.id}", f"j{op.id}"
    acc, th = lw.t(), lw.t()
    inner: list[Stmt] = [
        Load(th, x, _af(i_i, -1, n - 1)),  # reversed tap x[N-1-i]
        lw.guarded_mac(n_i, i_i, x, n, th, acc),
    ]
    body: list[Stmt] = [
        SetTemp(acc, ConstF(0.0)),
        For(i_i, 0, _lit(n), 1, inner, tag="filter_y_symm_opt.inner"),
        Store(out, _af(n_i), TempRef(acc)),
        # palindrome: y[Nout-1-n] = y[n], middle stored once
        SelectGuard(_af(n_i), 0, _lit(n - 1),
                    body=[Store(out, _af(n_i, -1, n_out - 1), TempRef(acc))]),
    ]
    lw.body.append(For(n_i, 0, _lit(n), 1, body, tag="filter_y_symm_opt.outer"))


def _lms_nest(lw: _Lowerer, op: OpNode, step: float, tag: str) -> None:
    x, d = lw.buf(op.operands[0]), lw.buf(op.operands[1])
    n = lw.operand_len(op, 0)
    m = int(op.attr("M"))
    w = lw.buf(op.id)  # weights accumulate in the result buffer
    n_i, i_i = f"i{op.id}", f"j{op.id}"
    y, tw, tx1, tm1 = lw.t(), lw.t(), lw.t(), lw.t()
    at = _af(n_i).plus(_af(i_i, -1))
    dot: list[Stmt] = [SelectGuard(at, 0, _lit(n), body=[
        Load(tw, w, _af(i_i)),
        Load(tx1, x, at),
        BinaryArith(tm1, "mul", TempRef(tw), TempRef(tx1)),
        BinaryArith(y, "add", TempRef(y), TempRef(tm1)),
    ])]
    td, e, t = lw.t(), lw.t(), lw.t()
    tx2, tu, tw2, tw3 = lw.t(), lw.t(), lw.t(), lw.t()
    upd: list[Stmt] = [SelectGuard(at, 0, _lit(n), body=[
        Load(tx2, x, at),
        BinaryArith(tu, "mul", TempRef(t), TempRef(tx2)),
        Load(tw2, w, _af(i_i)),
        BinaryArith(tw3, "add", TempRef(tw2), TempRef(tu)),
        Store(w, _af(i_i), TempRef(tw3)),
    ])]
    body: list[Stmt] = [
        SetTemp(y, ConstF(0.0)),
        For(i_i, 0, _lit(m), 1, dot, tag=f"{tag}.dot"),
        Load(td, d, _af(n_i)),
        BinaryArith(e, "sub", TempRef(td), TempRef(y)),
        BinaryArith(t, "mul", ConstF(step), TempRef(e)),
        For(i_i, 0, _lit(m), 1, upd, tag=f"{tag}.update"),
    ]
    lw.body.append(For(n_i, 0, _lit(n), 1, body, tag=f"{tag}.outer"))
    lw.body.append(CheckFinite(w))


def _e_lms(lw: _Lowerer, op: OpNode) -> None:
    _lms_nest(lw, op, float(op.attr("mu")), "lms_filter")


def _e_lms_gain(lw: _Lowerer, op: OpNode) -> None:
    step = float(op.attr("mu")) * float(op.attr("g"))
    _lms_nest(lw, op, step, "lms_filter_gain_opt")


def _e_binary(lw: _Lowerer, op: OpNode) -> None:
    n = lw.length(op.id)
    na, nb = lw.operand_len(op, 0), lw.operand_len(op, 1)
    a, b = lw.buf(op.operands[0]), lw.buf(op.operands[1])
    out = lw.buf(op.id)
    i = f"i{op.id}"
    ia = _af(i) if na != 1 else _lit(0)
    ib = _af(i) if nb != 1 else _lit(0)
    ta, tb, tv = lw.t(), lw.t(), lw.t()
    body: list[Stmt] = [
        Load(ta, a, ia),
        Load(tb, b, ib),
        BinaryArith(tv, op.opcode.value, TempRef(ta), TempRef(tb)),
        Store(out, _af(i), TempRef(tv)),
    ]
    lw.body.append(For(i, 0, _lit(n), 1, body, tag=op.opcode.value))


def _e_square(lw: _Lowerer, op: OpNode) -> None:
    out = lw.buf(op.id)
    tv = lw.t()
    lw.copy_loop(op, lambda i: _af(i), lw.length(op.id), "square",
                 lambda i, tx: [BinaryArith(tv, "mul", TempRef(tx), TempRef(tx)),
                                Store(out, _af(i), TempRef(tv))])


def _e_gain(lw: _Lowerer, op: OpNode) -> None:
    g = float(op.attr("g"))
    out = lw.buf(op.id)
    tv = lw.t()
    lw.copy_loop(op, lambda i: _af(i), lw.length(op.id), "gain",
                 lambda i, tx: [BinaryArith(tv, "mul", ConstF(g), TempRef(tx)),
                                Store(out, _af(i), TempRef(tv))])


def _e_reverse(lw: _Lowerer, op: OpNode) -> None:
    n = lw.length(op.id)
    out = lw.buf(op.id)
    lw.copy_loop(op, lambda i: _af(i, -1, n - 1), n, "reverse",
                 lambda i, tx: [Store(out, _af(i), TempRef(tx))])


def _e_sum(lw: _Lowerer, op: OpNode) -> None:
    n = lw.operand_len(op, 0)
    x, out = lw.buf(op.operands[0]), lw.buf(op.id)
    i = f"i{op.id}"
    acc, tx = lw.t(), lw.t()
    lw.body.append(SetTemp(acc, ConstF(0.0)))
    lw.body.append(For(i, 0, _lit(n), 1, [
        Load(tx, x, _af(i)),
        BinaryArith(acc, "add", TempRef(acc), TempRef(tx)),
    ], tag="sum"))
    lw.body.append(Store(out, _lit(0), TempRef(acc)))


def _e_threshold(lw: _Lowerer, op: OpNode) -> None:
    t = float(op.attr("t"))
    out = lw.buf(op.id)
    ta, ts = lw.t(), lw.t()
    lw.copy_loop(op, lambda i: _af(i), lw.length(op.id), "threshold",
                 lambda i, tv: [
                     IntrinsicCall(ta, "abs", TempRef(tv)),
                     Select(ts, "ge", TempRef(ta), ConstF(t),
                            TempRef(tv), ConstF(0.0)),
                     Store(out, _af(i), TempRef(ts)),
                 ])


def _e_quantize(lw: _Lowerer, op: OpNode) -> None:
    levels = int(op.attr("levels"))
    lo = float(op.attr("min"))
    hi = float(op.attr("max"))
    step = (hi - lo) / (levels - 1)
    out = lw.buf(op.id)
    tc1, tc2, tq1, tq, tr1, tr, tm, ty = (lw.t() for _ in range(8))
    lw.copy_loop(op, lambda i: _af(i), lw.length(op.id), "quantize",
                 lambda i, tv: [
                     Select(tc1, "lt", TempRef(tv), ConstF(lo),
                            ConstF(lo), TempRef(tv)),
                     Select(tc2, "gt", TempRef(tc1), ConstF(hi),
                            ConstF(hi), TempRef(tc1)),
                     BinaryArith(tq1, "sub", TempRef(tc2), ConstF(lo)),
                     BinaryArith(tq, "div", TempRef(tq1), ConstF(step)),
                     BinaryArith(tr1, "add", TempRef(tq), ConstF(0.5)),
                     IntrinsicCall(tr, "floor", TempRef(tr1)),
                     BinaryArith(tm, "mul", TempRef(tr), ConstF(step)),
                     BinaryArith(ty, "add", ConstF(lo), TempRef(tm)),
                     Store(out, _af(i), TempRef(ty)),
                 ])


def _e_rle(lw: _Lowerer, op: OpNode) -> None:
    n = lw.operand_len(op, 0)
    x, out = lw.buf(op.operands[0]), lw.buf(op.id)
    i = f"i{op.id}"
    rv, rl, tv = lw.t(), lw.t(), lw.t()
    lw.body.append(Load(rv, x, _lit(0)))
    lw.body.append(SetTemp(rl, ConstF(1.0)))
    lw.body.append(For(i, 1, _lit(n), 1, [
        Load(tv, x, _af(i)),
        IfCmp("eq", TempRef(tv), TempRef(rv),
              body=[BinaryArith(rl, "add", TempRef(rl), ConstF(1.0))],
              orelse=[DynAppend(out, TempRef(rv)),
                      DynAppend(out, TempRef(rl)),
                      SetTemp(rv, TempRef(tv)),
                      SetTemp(rl, ConstF(1.0))]),
    ], tag="run_len_encoding"))
    lw.body.append(DynAppend(out, TempRef(rv)))
    lw.body.append(DynAppend(out, TempRef(rl)))


def _e_upsample(lw: _Lowerer, op: OpNode) -> None:
    k = int(op.attr("k"))
    n = lw.operand_len(op, 0)
    out = lw.buf(op.id)
    lw.copy_loop(op, lambda i: _af(i), n, "upsample",
                 lambda i, tx: [Store(out, _af(i, k), TempRef(tx))])


def _e_downsample(lw: _Lowerer, op: OpNode) -> None:
    k = int(op.attr("k"))
    out = lw.buf(op.id)
    lw.copy_loop(op, lambda i: _af(i, k), lw.length(op.id), "downsample",
                 lambda i, tx: [Store(out, _af(i), TempRef(tx))])


def _osc_loop(lw: _Lowerer, op: OpNode, trig: str) -> None:
    n = int(op.attr("n"))
    c = 2.0 * math.pi * float(op.attr("f")) / float(op.attr("fs"))
    out = lw.buf(op.id)
    i = f"i{op.id}"
    ta, ts = lw.t(), lw.t()
    lw.body.append(For(i, 0, _lit(n), 1, [
        BinaryArith(ta, "mul", ConstF(c), IndexF(_af(i))),
        IntrinsicCall(ts, trig, TempRef(ta)),
        Store(out, _af(i), TempRef(ts)),
    ], tag=op.opcode.value))


def _e_sin_vec(lw: _Lowerer, op: OpNode) -> None:
    _osc_loop(lw, op, "sin")


def _e_cos_vec(lw: _Lowerer, op: OpNode) -> None:
    _osc_loop(lw, op, "cos")


def _e_range_vec(lw: _Lowerer, op: OpNode) -> None:
    n = int(op.attr("n"))
    start = float(op.attr("start"))
    step = float(op.attr("step"))
    out = lw.buf(op.id)
    i = f"i{op.id}"
    tm, tv = lw.t(), lw.t()
    lw.body.append(For(i, 0, _lit(n), 1, [
        BinaryArith(tm, "mul", ConstF(step), IndexF(_af(i))),
        BinaryArith(tv, "add", ConstF(start), TempRef(tm)),
        Store(out, _af(i), TempRef(tv)),
    ], tag="range_vec"))


_EMITTERS = {
    OpCode.INPUT: _e_input,
    OpCode.CONST_TENSOR: _e_const,
    OpCode.DELAY: _e_delay,
    OpCode.FIR_FILTER_RESPONSE: _e_fir_response,
    OpCode.CONV1D_FULL: _e_conv_full,
    OpCode.SLIDING_WINDOW_AVG: _e_sliding_avg,
    OpCode.DFT1D_REAL: _e_dft_real,
    OpCode.DFT1D_IMAG: _e_dft_imag,
    OpCode.IDFT1D: _e_idft,
    OpCode.LOW_PASS_FIR_COEFFS: _e_lowpass,
    OpCode.HAMMING_WINDOW: _e_hamming,
    OpCode.LMS_FILTER: _e_lms,
    OpCode.ADD: _e_binary,
    OpCode.SUB: _e_binary,
    OpCode.MUL: _e_binary,
    OpCode.DIV: _e_binary,
    OpCode.SQUARE: _e_square,
    OpCode.GAIN: _e_gain,
    OpCode.REVERSE: _e_reverse,
    OpCode.SUM: _e_sum,
    OpCode.THRESHOLD: _e_threshold,
    OpCode.QUANTIZE: _e_quantize,
    OpCode.RUN_LEN_ENCODING: _e_rle,
    OpCode.UPSAMPLE: _e_upsample,
    OpCode.DOWNSAMPLE: _e_downsample,
    OpCode.SIN_VEC: _e_sin_vec,
    OpCode.COS_VEC: _e_cos_vec,
    OpCode.RANGE_VEC: _e_range_vec,
    OpCode.FILTER_HAMM_OPT: _e_filter_hamm_opt,
    OpCode.FILTER_RES_SYMM_OPT: _e_filter_res_symm,
    OpCode.FILTER_Y_SYMM_OPT: _e_filter_y_symm,
    OpCode.DFT1D_REAL_SYMM: _e_dft_real_symm,
    OpCode.DFT1D_IMAG_SYMM: _e_dft_imag_symm,
    OpCode.DFT1D_FUSED: _e_dft_fused,
    OpCode.LMS_FILTER_GAIN_OPT: _e_lms_gain,
}


def lower_graph(graph: DspGraph) -> LoopProgram:
    """Lower every op to loop nests; bounds are validated statically."""
    lw = _Lowerer(graph)
    for op in graph.ops:
        lw.emit(op)
    program = LoopProgram(
        buffers=lw.buffers,
        body=lw.body,
        inputs=lw.inputs,
        outputs=[(vid, lw.buf(vid)) for vid in graph.prints],
        returns=[(vid, lw.buf(vid)) for vid in graph.returns],
    )
    validate_program(program)
    return program

"""The DSP opcode set and per-opcode signatures.

Each signature fixes the operand count, the attribute schema (names, types,
and legal ranges), and the number of SSA results.  The same table drives the
graph builder, the verifier, the textual round-trip, and the lowering
coverage check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional


class OpCode(Enum):
    INPUT = "input"
    CONST_TENSOR = "const_tensor"
    DELAY = "delay"
    FIR_FILTER_RESPONSE = "fir_filter_response"
    CONV1D_FULL = "conv1d_full"
    SLIDING_WINDOW_AVG = "sliding_window_avg"
    DFT1D_REAL = "dft1d_real"
    DFT1D_IMAG = "dft1d_imag"
    IDFT1D = "idft1d"
    LOW_PASS_FIR_COEFFS = "low_pass_fir_coeffs"
    HAMMING_WINDOW = "hamming_window"
    LMS_FILTER = "lms_filter"
    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    DIV = "div"
    SQUARE = "square"
    GAIN = "gain"
    REVERSE = "reverse"
    SUM = "sum"
    THRESHOLD = "threshold"
    QUANTIZE = "quantize"
    RUN_LEN_ENCODING = "run_len_encoding"
    UPSAMPLE = "upsample"
    DOWNSAMPLE = "downsample"
    SIN_VEC = "sin_vec"
    COS_VEC = "cos_vec"
    RANGE_VEC = "range_vec"
    PRINT = "print"
    # Created only by the rewriter, never by the graph builder.
    FILTER_HAMM_OPT = "filter_hamm_opt"
    FILTER_RES_SYMM_OPT = "filter_res_symm_opt"
    FILTER_Y_SYMM_OPT = "filter_y_symm_opt"
    DFT1D_REAL_SYMM = "dft1d_real_symm"
    DFT1D_IMAG_SYMM = "dft1d_imag_symm"
    DFT1D_FUSED = "dft1d_fused"
    LMS_FILTER_GAIN_OPT = "lms_filter_gain_opt"


@dataclass(frozen=True)
class AttrSpec:
    name: str
    kind: str  # "int" | "float" | "float_list" | "str"
    check: Optional[Callable[[object], bool]] = None
    legal: str = ""  # human-readable range, used in verifier messages

    def ok(self, value: object) -> bool:
        return self.check is None or bool(self.check(value))


@dataclass(frozen=True)
class OpSignature:
    opcode: OpCode
    n_operands: int
    attrs: tuple[AttrSpec, ...] = ()
    n_results: int = 1
    cross_check: Optional[Callable[[dict], Optional[str]]] = None

    def attr_spec(self, name: str) -> AttrSpec:
        for spec in self.attrs:
            if spec.name == name:
                return spec
        raise KeyError(name)


def _quantize_bounds(attrs: dict) -> Optional[str]:
    if attrs["min"] >= attrs["max"]:
        return f"quantize requires min < max, got min={attrs['min']} max={attrs['max']}"
    return None


_INT_NONNEG = AttrSpec("k", "int", lambda v: v >= 0, "k >= 0")
_CUTOFF = AttrSpec("wc", "float", lambda v: 0.0 < v < math.pi, "0 < wc < pi")

SIGNATURES: dict[OpCode, OpSignature] = {
    OpCode.INPUT: OpSignature(OpCode.INPUT, 0, (AttrSpec("name", "str"),)),
    OpCode.CONST_TENSOR: OpSignature(
        OpCode.CONST_TENSOR, 0,
        (AttrSpec("values", "float_list", lambda v: len(v) >= 1, "at least one element"),)),
    OpCode.DELAY: OpSignature(OpCode.DELAY, 1, (_INT_NONNEG,)),
    OpCode.FIR_FILTER_RESPONSE: OpSignature(OpCode.FIR_FILTER_RESPONSE, 2),
    OpCode.CONV1D_FULL: OpSignature(OpCode.CONV1D_FULL, 2),
    OpCode.SLIDING_WINDOW_AVG: OpSignature(
        OpCode.SLIDING_WINDOW_AVG, 1,
        (AttrSpec("window", "int", lambda v: v >= 1, "window >= 1"),)),
    OpCode.DFT1D_REAL: OpSignature(OpCode.DFT1D_REAL, 1),
    OpCode.DFT1D_IMAG: OpSignature(OpCode.DFT1D_IMAG, 1),
    OpCode.IDFT1D: OpSignature(OpCode.IDFT1D, 2),
    OpCode.LOW_PASS_FIR_COEFFS: OpSignature(
        OpCode.LOW_PASS_FIR_COEFFS, 0,
        (AttrSpec("L", "int", lambda v: v >= 1, "L >= 1"), _CUTOFF)),
    OpCode.HAMMING_WINDOW: OpSignature(
        OpCode.HAMMING_WINDOW, 0,
        (AttrSpec("L", "int", lambda v: v >= 2, "L >= 2"),)),
    OpCode.LMS_FILTER: OpSignature(
        OpCode.LMS_FILTER, 2,
        (AttrSpec("mu", "float", lambda v: v > 0.0, "mu > 0"),
         AttrSpec("M", "int", lambda v: v >= 1, "M >= 1"))),
    OpCode.ADD: OpSignature(OpCode.ADD, 2),
    OpCode.SUB: OpSignature(OpCode.SUB, 2),
    OpCode.MUL: OpSignature(OpCode.MUL, 2),
    OpCode.DIV: OpSignature(OpCode.DIV, 2),
    OpCode.SQUARE: OpSignature(OpCode.SQUARE, 1),
    OpCode.GAIN: OpSignature(OpCode.GAIN, 1, (AttrSpec("g", "float"),)),
    OpCode.REVERSE: OpSignature(OpCode.REVERSE, 1),
    OpCode.SUM: OpSignature(OpCode.SUM, 1),
    OpCode.THRESHOLD: OpSignature(
        OpCode.THRESHOLD, 1,
        (AttrSpec("t", "float", lambda v: v >= 0.0, "t >= 0"),)),
    OpCode.QUANTIZE: OpSignature(
        OpCode.QUANTIZE, 1,
        (AttrSpec("levels", "int", lambda v: v >= 2, "levels >= 2"),
         AttrSpec("min", "float"), AttrSpec("max", "float")),
        cross_check=_quantize_bounds),
    OpCode.RUN_LEN_ENCODING: OpSignature(OpCode.RUN_LEN_ENCODING, 1),
    OpCode.UPSAMPLE: OpSignature(
        OpCode.UPSAMPLE, 1, (AttrSpec("k", "int", lambda v: v >= 1, "k >= 1"),)),
    OpCode.DOWNSAMPLE: OpSignature(
        OpCode.DOWNSAMPLE, 1, (AttrSpec("k", "int", lambda v: v >= 1, "k >= 1"),)),
    OpCode.SIN_VEC: OpSignature(
        OpCode.SIN_VEC, 0,
        (AttrSpec("n", "int", lambda v: v >= 1, "n >= 1"),
         AttrSpec("f", "float"),
         AttrSpec("fs", "float", lambda v: v > 0.0, "fs > 0"))),
    OpCode.COS_VEC: OpSignature(
        OpCode.COS_VEC, 0,
        (AttrSpec("n", "int", lambda v: v >= 1, "n >= 1"),
         AttrSpec("f", "float"),
         AttrSpec("fs", "float", lambda v: v > 0.0, "fs > 0"))),
    OpCode.RANGE_VEC: OpSignature(
        OpCode.RANGE_VEC, 0,
        (AttrSpec("start", "float"), AttrSpec("step", "float"),
         AttrSpec("n", "int", lambda v: v >= 1, "n >= 1"))),
    OpCode.PRINT: OpSignature(OpCode.PRINT, 1, n_results=0),
    OpCode.FILTER_HAMM_OPT: OpSignature(
        OpCode.FILTER_HAMM_OPT, 0,
        (AttrSpec("L", "int", lambda v: v >= 2, "L >= 2"), _CUTOFF)),
    OpCode.FILTER_RES_SYMM_OPT: OpSignature(OpCode.FILTER_RES_SYMM_OPT, 2),
    OpCode.FILTER_Y_SYMM_OPT: OpSignature(OpCode.FILTER_Y_SYMM_OPT, 1),
    OpCode.DFT1D_REAL_SYMM: OpSignature(OpCode.DFT1D_REAL_SYMM, 1),
    OpCode.DFT1D_IMAG_SYMM: OpSignature(OpCode.DFT1D_IMAG_SYMM, 1),
    OpCode.DFT1D_FUSED: OpSignature(OpCode.DFT1D_FUSED, 1, n_results=2),
    OpCode.LMS_FILTER_GAIN_OPT: OpSignature(
        OpCode.LMS_FILTER_GAIN_OPT, 2,
        (AttrSpec("mu", "float", lambda v: v > 0.0, "mu > 0"),
         AttrSpec("M", "int", lambda v: v >= 1, "M >= 1"),
         AttrSpec("g", "float"))),
}

# Opcodes only the rewriter may introduce; the builder never emits these.
REWRITER_ONLY = frozenset({
    OpCode.FILTER_HAMM_OPT,
    OpCode.FILTER_RES_SYMM_OPT,
    OpCode.FILTER_Y_SYMM_OPT,
    OpCode.DFT1D_REAL_SYMM,
    OpCode.DFT1D_IMAG_SYMM,
    OpCode.DFT1D_FUSED,
    OpCode.LMS_FILTER_GAIN_OPT,
})

# Source-language spelling of each callable builtin.
BUILTINS: dict[str, OpCode] = {
    "delay": OpCode.DELAY,
    "firFilterResponse": OpCode.FIR_FILTER_RESPONSE,
    "conv1d": OpCode.CONV1D_FULL,
    "slidingWindowAvg": OpCode.SLIDING_WINDOW_AVG,
    "dft1dreal": OpCode.DFT1D_REAL,
    "dft1dimg": OpCode.DFT1D_IMAG,
    "idft1d": OpCode.IDFT1D,
    "lowPassFIRFilter": OpCode.LOW_PASS_FIR_COEFFS,
    "hammingWindow": OpCode.HAMMING_WINDOW,
    "lmsFilter": OpCode.LMS_FILTER,
    "gain": OpCode.GAIN,
    "reverse": OpCode.REVERSE,
    "square": OpCode.SQUARE,
    "sum": OpCode.SUM,
    "threshold": OpCode.THRESHOLD,
    "quantize": OpCode.QUANTIZE,
    "runLenEncoding": OpCode.RUN_LEN_ENCODING,
    "upsample": OpCode.UPSAMPLE,
    "downsample": OpCode.DOWNSAMPLE,
    "sinVec": OpCode.SIN_VEC,
    "cosVec": OpCode.COS_VEC,
    "rangeVec": OpCode.RANGE_VEC,
}

OPCODE_BY_NAME: dict[str, OpCode] = {op.value: op for op in OpCode}

"""Reference semantics for every opcode.

These are direct transcriptions of the defining recurrences, evaluated with
plain Python floats.  Reductions accumulate strictly left to right; nothing
here is vectorized or reassociated, so the functions double as the oracle
for the loop-level backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .errors import DspcError
from .graph import DspGraph, OpNode, ValueId
from .ops import OpCode


@dataclass(frozen=True)
class Tensor:
    """Rank-1 float tensor; ``logical_length`` trims trailing capacity padding."""

    data: tuple[float, ...]
    logical_length: Optional[int] = None

    def __post_init__(self) -> None:
        if self.logical_length is None:
            object.__setattr__(self, "logical_length", len(self.data))

    @property
    def values(self) -> tuple[float, ...]:
        return self.data[: self.logical_length]

    def __len__(self) -> int:
        return int(self.logical_length)  # type: ignore[arg-type]


def tensor(values: Iterable[float]) -> Tensor:
    return Tensor(tuple(float(v) for v in values))


class KernelError(DspcError):
    pass


class DivisionByZero(KernelError):
    def __init__(self, index: int):
        super().__init__(f"division by zero at element {index}")
        self.index = index


class Diverged(KernelError):
    def __init__(self, step: int):
        super().__init__(f"adaptive filter diverged at sample {step}")
        self.step = step


class AttributeRange(KernelError):
    pass


def _sinc(z: float) -> float:
    """Unnormalized sinc: sin(z)/z with sinc(0) = 1."""
    if z == 0.0:
        return 1.0
    return math.sin(z) / z


# --------------------------------------------------------------------------
# Structural ops


def k_delay(x: Tensor, k: int) -> Tensor:
    """y[n] = x[n-k], zero for n < k."""
    if k < 0:
        raise AttributeRange(f"delay needs k >= 0, got {k}")
    xs = x.values
    return tensor(xs[n - k] if n - k >= 0 else 0.0 for n in range(len(xs)))


def k_fir_response(x: Tensor, h: Tensor) -> Tensor:
    """y[n] = sum_i h[i] * x[n-i], same length as x (missing samples are zero)."""
    xs, hs = x.values, h.values
    n_out = len(xs)
    out = []
    for n in range(n_out):
        acc = 0.0
        for i in range(len(hs)):
            if 0 <= n - i < len(xs):
                acc += hs[i] * xs[n - i]
        out.append(acc)
    return tensor(out)


def k_conv1d_full(x: Tensor, h: Tensor) -> Tensor:
    """Full linear convolution, length N + L - 1."""
    xs, hs = x.values, h.values
    out = []
    for n in range(len(xs) + len(hs) - 1):
        acc = 0.0
        for i in range(len(hs)):
            if 0 <= n - i < len(xs):
                acc += hs[i] * xs[n - i]
        out.append(acc)
    return tensor(out)


def k_sliding_window_avg(x: Tensor, window: int) -> Tensor:
    """Trailing-window mean: y[n] = mean of the up-to-`window` samples ending at n."""
    if window < 1:
        raise AttributeRange(f"slidingWindowAvg needs window >= 1, got {window}")
    xs = x.values
    out = []
    for n in range(len(xs)):
        acc = 0.0
        for i in range(window):
            if 0 <= n - i < len(xs):
                acc += xs[n - i]
        out.append(acc / window)
    return tensor(out)


def k_reverse(x: Tensor) -> Tensor:
    return tensor(reversed(x.values))


# --------------------------------------------------------------------------
# Transforms


def _two_pi_over(n: int) -> float:
    return 2.0 * math.pi / n


def k_dft_real(x: Tensor) -> Tensor:
    """X_real[k] = sum_n x[n] * cos(2*pi*k*n/N)."""
    xs = x.values
    n_len = len(xs)
    c = _two_pi_over(n_len)
    out = []
    for k in range(n_len):
        acc = 0.0
        for n in range(n_len):
            acc += xs[n] * math.cos(c * (k * n))
        out.append(acc)
    return tensor(out)


def k_dft_imag(x: Tensor) -> Tensor:
    """X_imag[k] = -sum_n x[n] * sin(2*pi*k*n/N)."""
    xs = x.values
    n_len = len(xs)
    c = _two_pi_over(n_len)
    out = []
    for k in range(n_len):
        acc = 0.0
        for n in range(n_len):
            acc -= xs[n] * math.sin(c * (k * n))
        out.append(acc)
    return tensor(out)


def k_idft(xr: Tensor, xi: Tensor) -> Tensor:
    """x[n] = (1/N) * sum_k [Xr[k]*cos(2*pi*k*n/N) - Xi[k]*sin(2*pi*k*n/N)]."""
    rs, is_ = xr.values, xi.values
    if len(rs) != len(is_):
        raise AttributeRange("idft real/imag lengths differ")
    n_len = len(rs)
    c = _two_pi_over(n_len)
    out = []
    for n in range(n_len):
        acc = 0.0
        for k in range(n_len):
            acc += rs[k] * math.cos(c * (n * k))
            acc -= is_[k] * math.sin(c * (n * k))
        out.append(acc / n_len)
    return tensor(out)


# --------------------------------------------------------------------------
# Filter design


def k_lowpass_fir_coeffs(L: int, wc: float) -> Tensor:
    """Ideal low-pass taps: (wc/pi)*sinc(wc*(n - (L-1)/2)), midpoint wc/pi."""
    if L < 1:
        raise AttributeRange(f"lowPassFIRFilter needs L >= 1, got {L}")
    if not 0.0 < wc < math.pi:
        raise AttributeRange(f"cutoff must satisfy 0 < wc < pi, got {wc}")
    mid = (L - 1) / 2.0
    out = []
    for n in range(L):
        if n == mid:
            out.append(wc / math.pi)
        else:
            out.append((wc / math.pi) * _sinc(wc * (n - mid)))
    return tensor(out)


def k_hamming(L: int) -> Tensor:
    """ham[n] = 0.54 - 0.46*cos(2*pi*n/(L-1))."""
    if L < 2:
        raise AttributeRange(f"hammingWindow needs L >= 2, got {L}")
    c = 2.0 * math.pi / (L - 1)
    return tensor(0.54 - 0.46 * math.cos(c * n) for n in range(L))


# --------------------------------------------------------------------------
# Adaptive filtering


def k_lms_filter(x: Tensor, d: Tensor, mu: float, M: int) -> Tensor:
    """LMS weight adaptation; returns the final M-tap weight vector.

    Per sample n: y = w . x_window, e = d[n] - y, w += mu * e * x_window.
    Missing samples (n - i < 0) read as zero.
    """
    return _lms(x, d, mu, M, None)


def k_lms_filter_gain(x: Tensor, d: Tensor, mu: float, M: int, g: float) -> Tensor:
    """LMS with the gain folded into the update: w += (mu*g) * e * x_window."""
    return _lms(x, d, mu, M, g)


def _lms(x: Tensor, d: Tensor, mu: float, M: int, g: Optional[float]) -> Tensor:
    if M < 1:
        raise AttributeRange(f"lmsFilter needs M >= 1, got {M}")
    if mu <= 0.0:
        raise AttributeRange(f"lmsFilter needs mu > 0, got {mu}")
    xs, ds = x.values, d.values
    if len(xs) != len(ds):
        raise AttributeRange("lmsFilter input/desired lengths differ")
    step = mu if g is None else mu * g
    w = [0.0] * M
    for n in range(len(xs)):
        y = 0.0
        for i in range(M):
            if n - i >= 0:
                y += w[i] * xs[n - i]
        e = ds[n] - y
        t = step * e
        for i in range(M):
            if n - i >= 0:
                w[i] += t * xs[n - i]
        for v in w:
            if not math.isfinite(v):
                raise Diverged(n)
    return tensor(w)


# --------------------------------------------------------------------------
# Elementwise / reductions


def _broadcast_pair(a: Sequence[float], b: Sequence[float]) -> tuple[list[float], list[float]]:
    if len(a) == len(b):
        return list(a), list(b)
    if len(a) == 1:
        return [a[0]] * len(b), list(b)
    if len(b) == 1:
        return list(a), [b[0]] * len(a)
    raise AttributeRange(f"elementwise lengths {len(a)} and {len(b)} do not broadcast")


def k_elementwise(op: str, a: Tensor, b: Optional[Tensor] = None, *,
                  g: Optional[float] = None) -> Tensor:
    """add/sub/mul/div (with scalar broadcast), square, gain, reverse."""
    if op == "square":
        return tensor(v * v for v in a.values)
    if op == "gain":
        assert g is not None
        return tensor(g * v for v in a.values)
    if op == "reverse":
        return k_reverse(a)
    assert b is not None
    xs, ys = _broadcast_pair(a.values, b.values)
    if op == "add":
        return tensor(p + q for p, q in zip(xs, ys))
    if op == "sub":
        return tensor(p - q for p, q in zip(xs, ys))
    if op == "mul":
        return tensor(p * q for p, q in zip(xs, ys))
    if op == "div":
        out = []
        for i, (p, q) in enumerate(zip(xs, ys)):
            if q == 0.0:
                raise DivisionByZero(i)
            out.append(p / q)
        return tensor(out)
    raise AttributeRange(f"unknown elementwise op {op!r}")


def k_sum(x: Tensor) -> Tensor:
    acc = 0.0
    for v in x.values:
        acc += v
    return tensor([acc])


def k_threshold(x: Tensor, t: float) -> Tensor:
    """Keep samples with |x| >= t, zero the rest."""
    if t < 0.0:
        raise AttributeRange(f"threshold needs t >= 0, got {t}")
    return tensor(v if abs(v) >= t else 0.0 for v in x.values)


def k_quantize(x: Tensor, levels: int, lo: float, hi: float) -> Tensor:
    """Uniform mid-tread quantizer over [lo, hi] with `levels` levels.

    step = (hi-lo)/(levels-1); values are clamped, snapped to the nearest
    level (ties round half away from zero), and mapped back.
    """
    if levels < 2:
        raise AttributeRange(f"quantize needs levels >= 2, got {levels}")
    if lo >= hi:
        raise AttributeRange(f"quantize needs min < max, got {lo} >= {hi}")
    step = (hi - lo) / (levels - 1)
    out = []
    for v in x.values:
        c = lo if v < lo else hi if v > hi else v
        q = (c - lo) / step
        r = math.floor(q + 0.5)  # q >= 0 after clamping
        out.append(lo + r * step)
    return tensor(out)


def k_rle(x: Tensor) -> Tensor:
    """Flattened (value, run) pairs; logical length is twice the run count."""
    xs = x.values
    pairs: list[float] = []
    run_val = xs[0]
    run_len = 1
    for v in xs[1:]:
        if v == run_val:
            run_len += 1
        else:
            pairs.extend((run_val, float(run_len)))
            run_val = v
            run_len = 1
    pairs.extend((run_val, float(run_len)))
    return tensor(pairs)


def k_upsample(x: Tensor, k: int) -> Tensor:
    """Insert k-1 zeros after each sample; length N*k."""
    if k < 1:
        raise AttributeRange(f"upsample needs k >= 1, got {k}")
    out = [0.0] * (len(x.values) * k)
    for n, v in enumerate(x.values):
        out[n * k] = v
    return tensor(out)


def k_downsample(x: Tensor, k: int) -> Tensor:
    """Keep every k-th sample starting at 0; length ceil(N/k)."""
    if k < 1:
        raise AttributeRange(f"downsample needs k >= 1, got {k}")
    return tensor(x.values[::k])


# --------------------------------------------------------------------------
# Signal generators


def k_sin_vec(n: int, f: float, fs: float) -> Tensor:
    c = 2.0 * math.pi * f / fs
    return tensor(math.sin(c * i) for i in range(n))


def k_cos_vec(n: int, f: float, fs: float) -> Tensor:
    c = 2.0 * math.pi * f / fs
    return tensor(math.cos(c * i) for i in range(n))


def k_range_vec(start: float, step: float, n: int) -> Tensor:
    return tensor(start + step * i for i in range(n))


# --------------------------------------------------------------------------
# Rewriter-created opcodes: evaluated via their defining mirrored recurrences


def k_filter_hamm_opt(L: int, wc: float) -> Tensor:
    """Windowed low-pass taps computed for the first half and mirrored."""
    lpf = k_lowpass_fir_coeffs(L, wc).values
    ham = k_hamming(L).values
    out = [0.0] * L
    for n in range(math.ceil(L / 2)):
        v = lpf[n] * ham[n]
        out[n] = v
        out[L - 1 - n] = v
    return tensor(out)


def k_filter_res_symm(x: Tensor, h: Tensor) -> Tensor:
    """FIR response using tap symmetry: pair x[n-i] with x[n-(L-1-i)]."""
    xs, hs = x.values, h.values
    n_len, L = len(xs), len(hs)
    out = []
    for n in range(n_len):
        acc = 0.0
        for i in range(L // 2):
            t = 0.0
            if 0 <= n - i < n_len:
                t += xs[n - i]
            if 0 <= n - (L - 1 - i) < n_len:
                t += xs[n - (L - 1 - i)]
            acc += hs[i] * t
        if L % 2 == 1:
            mid = (L - 1) // 2
            if 0 <= n - mid < n_len:
                acc += hs[mid] * xs[n - mid]
        out.append(acc)
    return tensor(out)


def k_filter_y_symm(x: Tensor) -> Tensor:
    """Autocorrelation-style conv(x, reverse(x)): first half computed, rest mirrored."""
    xs = x.values
    n_len = len(xs)
    n_out = 2 * n_len - 1
    out = [0.0] * n_out
    for n in range(math.ceil(n_out / 2)):
        acc = 0.0
        for i in range(n_len):
            if 0 <= n - i < n_len:
                acc += xs[n_len - 1 - i] * xs[n - i]
        out[n] = acc
        out[n_out - 1 - n] = acc
    return tensor(out)


def k_dft_real_symm(x: Tensor) -> Tensor:
    """Real DFT of an even signal: compute k <= N/2, mirror X[N-k] = X[k]."""
    xs = x.values
    n_len = len(xs)
    c = _two_pi_over(n_len)
    out = [0.0] * n_len
    for k in range(n_len // 2 + 1):
        acc = 0.0
        for n in range(n_len):
            acc += xs[n] * math.cos(c * (k * n))
        out[k] = acc
        if 1 <= k and n_len - k != k:
            out[n_len - k] = acc
    return tensor(out)


def k_dft_imag_symm(x: Tensor) -> Tensor:
    """Imag DFT with conjugate symmetry: X[N-k] = -X[k]."""
    xs = x.values
    n_len = len(xs)
    c = _two_pi_over(n_len)
    out = [0.0] * n_len
    for k in range(n_len // 2 + 1):
        acc = 0.0
        for n in range(n_len):
            acc -= xs[n] * math.sin(c * (k * n))
        out[k] = acc
        if 1 <= k and n_len - k != k:
            out[n_len - k] = -acc
    return tensor(out)


def k_dft_fused(x: Tensor) -> tuple[Tensor, Tensor]:
    """Real and imaginary DFT accumulated in a single pass over (k, n)."""
    xs = x.values
    n_len = len(xs)
    c = _two_pi_over(n_len)
    re, im = [], []
    for k in range(n_len):
        acc_r = 0.0
        acc_i = 0.0
        for n in range(n_len):
            ang = c * (k * n)
            v = xs[n]
            acc_r += v * math.cos(ang)
            acc_i -= v * math.sin(ang)
        re.append(acc_r)
        im.append(acc_i)
    return tensor(re), tensor(im)


# --------------------------------------------------------------------------
# Graph evaluation


def eval_graph(graph: DspGraph, inputs: Optional[dict[str, Tensor]] = None
               ) -> dict[ValueId, Tensor]:
    """Evaluate every op with the reference kernels; returns value -> Tensor."""
    inputs = inputs or {}
    values: dict[ValueId, Tensor] = {}
    for op in graph.ops:
        results = _eval_op(op, [values[v] for v in op.operands], inputs)
        for rid, t in zip(op.result_ids, results):
            values[rid] = t
    return values


def _eval_op(op: OpNode, args: list[Tensor], inputs: dict[str, Tensor]) -> tuple[Tensor, ...]:
    oc = op.opcode
    if oc is OpCode.INPUT:
        name = str(op.attr("name"))
        if name not in inputs:
            raise KernelError(f"unbound input {name!r}")
        return (inputs[name],)
    if oc is OpCode.CONST_TENSOR:
        return (tensor(op.attr("values")),)
    if oc is OpCode.DELAY:
        return (k_delay(args[0], int(op.attr("k"))),)
    if oc is OpCode.FIR_FILTER_RESPONSE:
        return (k_fir_response(args[0], args[1]),)
    if oc is OpCode.CONV1D_FULL:
        return (k_conv1d_full(args[0], args[1]),)
    if oc is OpCode.SLIDING_WINDOW_AVG:
        return (k_sliding_window_avg(args[0], int(op.attr("window"))),)
    if oc is OpCode.DFT1D_REAL:
        return (k_dft_real(args[0]),)
    if oc is OpCode.DFT1D_IMAG:
        return (k_dft_imag(args[0]),)
    if oc is OpCode.IDFT1D:
        return (k_idft(args[0], args[1]),)
    if oc is OpCode.LOW_PASS_FIR_COEFFS:
        return (k_lowpass_fir_coeffs(int(op.attr("L")), float(op.attr("wc"))),)
    if oc is OpCode.HAMMING_WINDOW:
        return (k_hamming(int(op.attr("L"))),)
    if oc is OpCode.LMS_FILTER:
        return (k_lms_filter(args[0], args[1], float(op.attr("mu")), int(op.attr("M"))),)
    if oc in (OpCode.ADD, OpCode.SUB, OpCode.MUL, OpCode.DIV):
        return (k_elementwise(oc.value, args[0], args[1]),)
    if oc is OpCode.SQUARE:
        return (k_elementwise("square", args[0]),)
    if oc is OpCode.GAIN:
        return (k_elementwise("gain", args[0], g=float(op.attr("g"))),)
    if oc is OpCode.REVERSE:
        return (k_reverse(args[0]),)
    if oc is OpCode.SUM:
        return (k_sum(args[0]),)
    if oc is OpCode.THRESHOLD:
        return (k_threshold(args[0], float(op.attr("t"))),)
    if oc is OpCode.QUANTIZE:
        return (k_quantize(args[0], int(op.attr("levels")),
                           float(op.attr("min")), float(op.attr("max"))),)
    if oc is OpCode.RUN_LEN_ENCODING:
        return (k_rle(args[0]),)
    if oc is OpCode.UPSAMPLE:
        return (k_upsample(args[0], int(op.attr("k"))),)
    if oc is OpCode.DOWNSAMPLE:
        return (k_downsample(args[0], int(op.attr("k"))),)
    if oc is OpCode.SIN_VEC:
        return (k_sin_vec(int(op.attr("n")), float(op.attr("f")), float(op.attr("fs"))),)
    if oc is OpCode.COS_VEC:
        return (k_cos_vec(int(op.attr("n")), float(op.attr("f")), float(op.attr("fs"))),)
    if oc is OpCode.RANGE_VEC:
        return (k_range_vec(float(op.attr("start")), float(op.attr("step")),
                            int(op.attr("n"))),)
    if oc is OpCode.PRINT:
        return ()
    if oc is OpCode.FILTER_HAMM_OPT:
        return (k_filter_hamm_opt(int(op.attr("L")), float(op.attr("wc"))),)
    if oc is OpCode.FILTER_RES_SYMM_OPT:
        return (k_filter_res_symm(args[0], args[1]),)
    if oc is OpCode.FILTER_Y_SYMM_OPT:
        return (k_filter_y_symm(args[0]),)
    if oc is OpCode.DFT1D_REAL_SYMM:
        return (k_dft_real_symm(args[0]),)
    if oc is OpCode.DFT1D_IMAG_SYMM:
        return (k_dft_imag_symm(args[0]),)
    if oc is OpCode.DFT1D_FUSED:
        return k_dft_fused(args[0])
    if oc is OpCode.LMS_FILTER_GAIN_OPT:
        return (k_lms_filter_gain(args[0], args[1], float(op.attr("mu")),
                                  int(op.attr("M")), float(op.attr("g"))),)
    raise KernelError(f"no kernel for opcode {oc.value}")
